"""D-norms: exact evaluation, Monte Carlo estimation, Wasserstein distances
between D-norms, doubly stochastic generator iteration, the symmetric
Dirichlet family and max-stable / GPD simulation."""

__version__ = "0.1.0"

from dnorm.core import (  # noqa: E402
    DNormError,
    Dependence,
    Estimate,
    NumericalError,
    l1_norm,
    logistic_norm,
    sms_df,
    sup_norm,
    takahashi_classify,
)
from dnorm.generators import (  # noqa: E402
    Constant,
    Dirichlet,
    Discrete,
    DiscreteMeasure,
    FrechetLogistic,
    Product,
    ScaledPermutation,
    make_rng,
    matrix_apply,
    product,
    standardize,
)
from dnorm.montecarlo import EstimationConfig, estimate_dnorm, estimate_extremal_coefficient  # noqa: E402
