"""Symmetric Dirichlet D-norms.

The generator ``Z = d V / sum(V)`` with iid gamma(alpha) ``V_i`` gives a
one-parameter family that runs from independence (``alpha -> 0``, extremal
coefficient ``d``) to complete dependence (``alpha -> inf``, coefficient 1).
Useful identities:

* ``||x||_{D(alpha)} = E(max_i |x_i| V_i) / alpha`` (no quotient needed);
* bivariate closed form through the regularized incomplete beta function;
* ``m(alpha) = ||1||_{D(alpha)}`` is decreasing, equals the harmonic number
  ``H_d`` at ``alpha = 1`` and ``1 + 1/(alpha B(alpha, 1/2))`` when ``d = 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import betaln

from dnorm.core import DNormError, Estimate, NumericalError, as_point
from dnorm.generators import GeneratorSpec, log_gamma_variates
from dnorm.montecarlo import (
    EstimationConfig,
    estimate_dirichlet_dnorm_gamma_form,
    run_streams,
)

__all__ = [
    "regularized_incomplete_beta",
    "bivariate_dirichlet_norm",
    "generator_constant_bivariate",
    "generator_constant_bivariate_forms",
    "harmonic_generator_constant",
    "generator_constant",
    "AlphaSolution",
    "solve_alpha_for_constant",
    "BoundsReport",
    "dirichlet_norm_bounds_check",
    "uniform_spacings_sample",
    "UniformSpacings",
]

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 100_000
_EXACT_HARMONIC_MAX = 2000


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericalError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """``I_x(a, b) = B(a, b)**-1 * int_0^x u**(a-1) (1-u)**(b-1) du``."""
    if not (a > 0 and b > 0):
        raise DNormError(f"incomplete beta needs a, b > 0, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise DNormError(f"incomplete beta needs x in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    log_front = a * math.log(x) + b * math.log1p(-x) - float(betaln(a, b))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def _check_alpha(alpha: float) -> None:
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DNormError(f"alpha must be a finite number > 0, got {alpha}")


def bivariate_dirichlet_norm(x: float, y: float, alpha: float) -> float:
    """Closed-form ``||(x, y)||_{D(alpha)}``; the zero vector has norm 0."""
    _check_alpha(alpha)
    ax, ay = abs(x), abs(y)
    s = ax + ay
    if s == 0.0:
        return 0.0
    return ax * regularized_incomplete_beta(alpha, alpha + 1.0, ax / s) + ay * regularized_incomplete_beta(
        alpha, alpha + 1.0, ay / s
    )


def generator_constant_bivariate_forms(alpha: float) -> tuple[float, float]:
    """``1 + Gamma(a+1/2) / (sqrt(pi) Gamma(a+1))`` and ``1 + 1/(a B(a, 1/2))``."""
    _check_alpha(alpha)
    gamma_form = 1.0 + math.exp(math.lgamma(alpha + 0.5) - math.lgamma(alpha + 1.0)) / math.sqrt(math.pi)
    beta = math.exp(math.lgamma(alpha) + math.lgamma(0.5) - math.lgamma(alpha + 0.5))
    beta_form = 1.0 + 1.0 / (alpha * beta)
    return gamma_form, beta_form


def generator_constant_bivariate(alpha: float) -> float:
    """Extremal coefficient ``m(alpha)`` of the bivariate Dirichlet D-norm."""
    gamma_form, beta_form = generator_constant_bivariate_forms(alpha)
    if abs(gamma_form - beta_form) > 1e-10:
        raise NumericalError(f"closed forms of m({alpha}) disagree: {gamma_form!r} vs {beta_form!r}")
    return gamma_form


def harmonic_generator_constant(d: int) -> float:
    """``H_d = sum_{k<=d} 1/k``, the extremal coefficient at ``alpha = 1``.

    Exact rational arithmetic up to d = 2000; beyond that an exactly rounded
    sum (``math.fsum``) of the correctly rounded terms ``1/k``.
    """
    if d < 1:
        raise DNormError(f"d must be >= 1, got {d}")
    if d <= _EXACT_HARMONIC_MAX:
        return float(sum(Fraction(1, k) for k in range(1, d + 1)))
    return math.fsum((1.0 / np.arange(1, d + 1, dtype=float)).tolist())


def generator_constant(alpha: float, d: int, cfg: EstimationConfig | None = None) -> float | Estimate:
    """``m(alpha)`` in dimension ``d``.

    Exact (a float) when ``d == 2`` or ``alpha == 1``; otherwise a Monte Carlo
    :class:`Estimate` from the gamma representation.
    """
    _check_alpha(alpha)
    if d < 2:
        raise DNormError(f"d must be >= 2, got {d}")
    if d == 2:
        return generator_constant_bivariate(alpha)
    if alpha == 1:
        return harmonic_generator_constant(d)
    return estimate_dirichlet_dnorm_gamma_form(alpha, np.ones(d), cfg or EstimationConfig())


@dataclass(frozen=True)
class AlphaSolution:
    """Result of inverting ``m``.

    ``alpha_low``/``alpha_high`` bracket the root; for ``d > 2`` their
    endpoints were decided at 3 standard errors. ``m_std_error`` is 0 for the
    exact bivariate inversion.
    """

    alpha: float
    m_value: float
    m_std_error: float
    alpha_low: float
    alpha_high: float
    n_samples: int
    exact: bool

    def m_interval(self, k: float = 3.0) -> tuple[float, float]:
        return self.m_value - k * self.m_std_error, self.m_value + k * self.m_std_error

    def contains(self, alpha: float) -> bool:
        return self.alpha_low <= alpha <= self.alpha_high


_BRACKET_LO = 2.0**-20
_BRACKET_HI = 2.0**20


def _solve_bivariate(target: float, tol: float) -> AlphaSolution:
    lo, hi = _BRACKET_LO, _BRACKET_HI
    # m decreases: m(lo) > target > m(hi) is required.
    while generator_constant_bivariate(lo) <= target:
        lo /= 2.0
        if lo < 1e-300:
            raise NumericalError(f"cannot bracket target {target} from below")
    while generator_constant_bivariate(hi) >= target:
        hi *= 2.0
        if hi > 1e300:
            raise NumericalError(f"cannot bracket target {target} from above")
    mid = math.sqrt(lo * hi)
    for _ in range(400):
        mid = math.sqrt(lo * hi)
        m = generator_constant_bivariate(mid)
        if abs(m - target) <= tol:
            break
        if m > target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-15:
            break
    m = generator_constant_bivariate(mid)
    return AlphaSolution(mid, m, 0.0, lo, hi, 0, True)


def solve_alpha_for_constant(
    target: float,
    d: int,
    tol: float = 1e-8,
    cfg: EstimationConfig | None = None,
    max_doublings: int = 4,
) -> AlphaSolution:
    """Find ``alpha`` with ``m(alpha) = target`` by bisection in ``log(alpha)``.

    ``d == 2`` bisects the closed form. ``d > 2`` bisects Monte Carlo
    estimates: a step is taken only when ``target`` lies outside the 3-SE band
    of the estimate; otherwise the sample size is doubled, at most
    ``max_doublings`` times. If the band still contains ``target`` the search
    stops there, provided the band half-width is within ``tol``; otherwise
    :class:`NumericalError` asks for more samples.
    """
    if d < 2:
        raise DNormError(f"d must be >= 2, got {d}")
    if not 1.0 < target < d:
        raise DNormError(f"target must lie strictly between 1 and d={d}, got {target}")
    if d == 2:
        return _solve_bivariate(target, tol)

    cfg = cfg or EstimationConfig()
    ones = np.ones(d)
    cap = cfg.n_samples * 2**max_doublings

    def evaluate(alpha: float) -> tuple[int, Estimate]:
        """Sign of ``m(alpha) - target`` (0 = undecided) and the last estimate."""
        n = cfg.n_samples
        while True:
            est = estimate_dirichlet_dnorm_gamma_form(alpha, ones, cfg.with_samples(n))
            lo, hi = est.interval(3.0)
            if target < lo:
                return 1, est
            if target > hi:
                return -1, est
            if n >= cap:
                return 0, est
            n *= 2

    # Grow a bracket whose endpoints are decided: m(lo) > target > m(hi).
    lo = 0.25
    while evaluate(lo)[0] <= 0:
        lo /= 4.0
        if lo < _BRACKET_LO:
            raise NumericalError(f"cannot bracket target {target} from below down to alpha={_BRACKET_LO}")
    hi = 4.0
    while evaluate(hi)[0] >= 0:
        hi *= 4.0
        if hi > _BRACKET_HI:
            raise NumericalError(f"cannot bracket target {target} from above up to alpha={_BRACKET_HI}")
    # Now m(lo) > target > m(hi), both decided.
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        sign, est = evaluate(mid)
        if sign == 0:
            _check_band(mid, est, tol)
            # Shrink the bracket to the set of alphas whose band covers target.
            lo = _decision_edge(evaluate, lo, mid, 1)
            hi = _decision_edge(evaluate, hi, mid, -1)
            return AlphaSolution(mid, est.value, est.std_error, lo, hi, est.n_samples, False)
        if sign > 0:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-12:
            break
    mid = math.sqrt(lo * hi)
    est = estimate_dirichlet_dnorm_gamma_form(mid, ones, cfg.with_samples(cap))
    return AlphaSolution(mid, est.value, est.std_error, lo, hi, est.n_samples, False)


def _check_band(alpha: float, est: Estimate, tol: float) -> None:
    if 3.0 * est.std_error > tol:
        raise NumericalError(
            f"3-SE band {3 * est.std_error:.3g} at alpha={alpha:.6g} exceeds tol={tol:.3g} with "
            f"{est.n_samples} samples; increase n_samples"
        )


def _decision_edge(evaluate, decided: float, undecided: float, sign: int, steps: int = 8) -> float:
    """Bisect (in log alpha) toward the last point still decided as ``sign``."""
    for _ in range(steps):
        mid = math.sqrt(decided * undecided)
        if evaluate(mid)[0] == sign:
            decided = mid
        else:
            undecided = mid
    return decided


@dataclass(frozen=True)
class BoundsReport:
    """``a1 ||x||_{a1} <= a2 ||x||_{a2} <= a1 ||x||_{a1} + (a2-a1) ||x||_{a2-a1}``.

    ``lower``, ``middle``, ``upper`` are the three terms; ``violations`` counts
    draws where the coupled per-sample chain fails.
    """

    alpha1: float
    alpha2: float
    lower: Estimate
    middle: Estimate
    upper: Estimate
    gap_low: Estimate
    gap_high: Estimate
    violations: int

    @property
    def passed(self) -> bool:
        return (
            self.gap_low.value >= -3.0 * self.gap_low.std_error
            and self.gap_high.value >= -3.0 * self.gap_high.std_error
            and self.violations == 0
        )


# Relative slack for the per-sample chain; covers rounding in max(a)+max(b).
_CHAIN_RTOL = 4 * np.finfo(float).eps


def dirichlet_norm_bounds_check(
    alpha1: float, alpha2: float, x, cfg: EstimationConfig | None = None
) -> BoundsReport:
    """Check the alpha-scaled sub/superadditivity chain with coupled gamma draws.

    Per draw ``V ~ gamma(a1)``, ``W ~ gamma(a2 - a1)``, so ``V + W ~ gamma(a2)``
    and each term is an expectation of ``max_i |x_i| (.)``.
    """
    _check_alpha(alpha1)
    _check_alpha(alpha2)
    if not alpha1 < alpha2:
        raise DNormError(f"need 0 < alpha1 < alpha2, got {alpha1}, {alpha2}")
    cfg = cfg or EstimationConfig()
    ax = np.abs(as_point(x))
    d = ax.size
    counter = [0]

    def draw(n, rng):
        v = np.exp(log_gamma_variates(alpha1, (n, d), rng))
        w = np.exp(log_gamma_variates(alpha2 - alpha1, (n, d), rng))
        a = np.max(ax * v, axis=1)
        b = np.max(ax * (v + w), axis=1)
        c = a + np.max(ax * w, axis=1)
        bad = (a > b * (1 + _CHAIN_RTOL)) | (b > c * (1 + _CHAIN_RTOL))
        counter[0] += int(np.count_nonzero(bad))
        return a, b, c, b - a, c - b

    if cfg.n_streams != 1:
        # The violation counter is shared; keep it single-threaded.
        cfg = EstimationConfig(cfg.n_samples, cfg.seed, 1)
    stats = run_streams(draw, cfg, n_outputs=5)
    lower, middle, upper, gap_low, gap_high = (s.estimate(cfg.seed) for s in stats)
    return BoundsReport(alpha1, alpha2, lower, middle, upper, gap_low, gap_high, counter[0])


def uniform_spacings_sample(d: int, rng: np.random.Generator) -> np.ndarray:
    """``d`` times the spacings of ``d-1`` sorted uniforms: a Dirichlet(1) generator draw."""
    return UniformSpacings(d).sample(rng)


@dataclass(frozen=True)
class UniformSpacings(GeneratorSpec):
    """Dirichlet(1) generator sampled through uniform spacings."""

    d: int

    def __post_init__(self):
        if self.d < 2:
            raise DNormError(f"uniform spacings need d >= 2, got {self.d}")

    def sample_batch(self, n, rng):
        u = np.sort(rng.random(size=(n, self.d - 1)), axis=1)
        edges = np.concatenate([np.zeros((n, 1)), u, np.ones((n, 1))], axis=1)
        return self.d * np.diff(edges, axis=1)

    @property
    def on_simplex(self):
        return True
