import csv
import io
import math

import numpy as np
import pytest
from scipy import stats

from dnorm.core import DNormError, NumericalError, sms_df
from dnorm.generators import Constant, Dirichlet, GeneratorSpec, ScaledPermutation, make_rng
from dnorm.montecarlo import EstimationConfig
from dnorm.simulate import (
    MaxStableConfig,
    df_grid_check,
    empirical_df,
    gpd_survivor,
    ks_critical_value,
    ks_margin_test,
    max_stability_check,
    poisson_max,
    sample_gpd,
    sample_gpd_batch,
    sample_max_stable,
    sample_max_stable_batch,
    samples_to_csv,
)


def test_poisson_max_shapes():
    arrivals = np.array([[1.0, 2.0, 4.0]])
    z = np.array([[[1.0, 0.0], [4.0, 1.0], [0.0, 8.0]]])
    assert np.array_equal(poisson_max(arrivals, z), [[2.0, 2.0]])


def test_constant_generator_gives_equal_coordinates():
    s = sample_max_stable_batch(MaxStableConfig(Constant(2), 50), 100)
    assert np.all(s[:, 0] == s[:, 1])
    assert np.all(s < 0)
    # with Z = 1 the sup is 1 / Gamma_1, so eta = -Gamma_1 is exactly -Exp(1)
    assert ks_margin_test(s, 0) < ks_critical_value(100, 0.01)


def test_max_stable_reproducible():
    cfg = MaxStableConfig(Dirichlet(3, 2.0), 100, seed=9)
    assert np.array_equal(sample_max_stable_batch(cfg, 20), sample_max_stable_batch(cfg, 20))
    assert sample_max_stable(cfg).shape == (3,)


def test_max_stable_config_validation():
    with pytest.raises(DNormError):
        MaxStableConfig(Constant(2), 0)
    with pytest.raises(DNormError):
        sample_max_stable_batch(MaxStableConfig(Constant(2)), -1)


def test_zero_components_retried_then_fail():
    class Sparse(GeneratorSpec):
        """Hits coordinate 1 with tiny probability."""

        d = 2

        def sample_batch(self, n, rng):
            out = np.zeros((n, 2))
            out[:, 0] = 1.0
            return out

    with pytest.raises(NumericalError):
        sample_max_stable_batch(MaxStableConfig(Sparse(), 4), 3)


def test_retry_fills_rare_margins():
    # ScaledPermutation in d=3 with 4 points leaves some margin empty in
    # roughly half the draws; retries with 8, 16, 32 points repair them.
    s = sample_max_stable_batch(MaxStableConfig(ScaledPermutation(3), 4), 200, make_rng(1))
    assert np.all(np.isfinite(s)) and np.all(s < 0)


@pytest.mark.parametrize("spec", [Constant(3), ScaledPermutation(3), Dirichlet(3, 0.5)])
def test_margins_standard_negative_exponential(spec):
    s = sample_max_stable_batch(MaxStableConfig(spec, 500, seed=3), 4000)
    crit = ks_critical_value(4000, 0.001)
    for i in range(3):
        assert ks_margin_test(s, i) < crit


def test_ks_matches_scipy():
    s = -make_rng(0).exponential(size=(500, 1))
    ours = ks_margin_test(s, 0)
    ref = stats.kstest(-s[:, 0], "expon").statistic
    assert ours == pytest.approx(ref, abs=1e-14)
    assert ks_critical_value(500, 0.01) == pytest.approx(stats.kstwo.isf(0.01, 500))


def test_ks_argument_checks():
    with pytest.raises(DNormError):
        ks_margin_test(np.zeros((10, 2)) - 1, 0)
    with pytest.raises(DNormError):
        ks_margin_test(np.zeros((200, 2)) - 1, 2)
    with pytest.raises(DNormError):
        ks_margin_test(np.ones((200, 2)), 0)
    with pytest.raises(DNormError):
        ks_margin_test(np.ones(200), 0)


def test_df_grid_against_l1():
    # ScaledPermutation generates L1: G(x) = exp(-sum |x_i|), i.e. independent margins
    s = sample_max_stable_batch(MaxStableConfig(ScaledPermutation(2), 200, seed=4), 20_000)
    pts = [[-0.5, -0.5], [-1.0, -0.2], [-2.0, -1.0]]
    checks = df_grid_check(s, pts, lambda x: sms_df(x, float(np.abs(x).sum())))
    assert all(c.ok for c in checks), checks


def test_max_stability_check_runs_and_passes():
    s = sample_max_stable_batch(MaxStableConfig(Dirichlet(2, 1.0), 300, seed=5), 20_000)
    res = max_stability_check(s, 2, [[-0.5, -0.5], [-1.0, -0.3]])
    assert all(c.ok for c in res)
    with pytest.raises(DNormError):
        max_stability_check(s[:10], 5, [[-1, -1]])
    with pytest.raises(DNormError):
        max_stability_check(s, 0, [[-1, -1]])


def test_empirical_df():
    s = np.array([[-1.0, -1.0], [-0.5, -2.0], [-3.0, -0.1]])
    p, se = empirical_df(s, [-0.5, -0.5])
    assert p == pytest.approx(2 / 3)
    assert se == pytest.approx(math.sqrt(2 / 27))


def test_gpd_sampler_shape_and_support():
    y = sample_gpd_batch(1.0, 3, 1000, make_rng(0))
    assert y.shape == (1000, 3)
    assert np.all(y < 0)
    assert sample_gpd(2.0, 2, make_rng(0)).shape == (2,)
    with pytest.raises(DNormError):
        sample_gpd_batch(0.0, 3, 10, make_rng(0))
    with pytest.raises(DNormError):
        sample_gpd_batch(1.0, 1, 10, make_rng(0))


@pytest.mark.parametrize("d", [2, 4])
def test_gpd_exceedance_c_over_d(d):
    # alpha = 1: P(Y > -c 1) = c E(min V_i) = c / d for c <= 1/d
    c = 1.0 / (2 * d)
    y = sample_gpd_batch(1.0, d, 100_000, make_rng(7))
    p = np.mean(np.all(y > -c, axis=1))
    se = math.sqrt((c / d) * (1 - c / d) / y.shape[0])
    assert abs(p - c / d) <= 4 * se


def test_gpd_survivor_vs_empirical():
    x = np.array([-0.1, -0.3, -0.2])
    est = gpd_survivor(x, 2.0, EstimationConfig(100_000))
    y = sample_gpd_batch(2.0, 3, 200_000, make_rng(3))
    p, se = empirical_df(-y, -x)  # P(Y > x) = P(-Y < -x)
    assert abs(est.value - p) <= 5 * math.hypot(est.std_error, se)


def test_gpd_survivor_region():
    with pytest.raises(DNormError):
        gpd_survivor([-0.6, -0.1], 1.0)  # ||x||_inf > 1/d
    with pytest.raises(DNormError):
        gpd_survivor([0.1, -0.1], 1.0)
    assert gpd_survivor([0.0, -0.2], 1.0, EstimationConfig(1000)).value == 0.0


def test_samples_to_csv_roundtrip():
    s = np.array([[-0.1, -1 / 3], [-2.5e-10, -7.0]])
    text = samples_to_csv(s, "eta")
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["eta_1", "eta_2"]
    back = np.array(rows[1:], dtype=float)
    assert np.array_equal(back, s)
