"""Simulation of standard max-stable and generalized Pareto vectors.

Max-stable vectors use the Poisson representation ``eta = -1 / sup_k V_k Z_k``
where ``V_k = 1 / Gamma_k`` are the points of a Poisson process with mean
measure ``r**-2 dr`` (``Gamma_k`` are arrival times of a unit-rate process)
and ``Z_k`` are iid generator copies. The supremum is truncated to the
``n_points`` largest points.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from dnorm.core import DNormError, Estimate, NumericalError, as_point
from dnorm.generators import DEFAULT_SEED, Dirichlet, GeneratorSpec, log_gamma_variates, make_rng
from dnorm.montecarlo import EstimationConfig, run_streams

__all__ = [
    "MaxStableConfig",
    "poisson_max",
    "sample_max_stable",
    "sample_max_stable_batch",
    "sample_gpd",
    "sample_gpd_batch",
    "gpd_survivor",
    "ks_margin_test",
    "ks_critical_value",
    "empirical_df",
    "GridCheck",
    "df_grid_check",
    "max_stability_check",
    "samples_to_csv",
]

_MAX_RETRIES = 3
# Upper bound on floats held per chunk of (draws x points x d).
_CHUNK_FLOATS = 1 << 21


@dataclass(frozen=True)
class MaxStableConfig:
    spec: GeneratorSpec
    n_points: int = 1000
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.n_points < 1:
            raise DNormError(f"n_points must be >= 1, got {self.n_points}")


def poisson_max(arrivals: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``max_k Z_k / Gamma_k`` over the point axis.

    ``arrivals`` has shape ``(..., K)`` (increasing arrival times), ``z`` shape
    ``(..., K, d)``.
    """
    return np.max(z / arrivals[..., None], axis=-2)


def _max_stable_rows(spec: GeneratorSpec, n: int, n_points: int, rng) -> np.ndarray:
    out = np.empty((n, spec.d))
    per_draw = n_points * spec.d
    step = max(1, _CHUNK_FLOATS // per_draw)
    for start in range(0, n, step):
        m = min(step, n - start)
        arrivals = np.cumsum(rng.standard_exponential((m, n_points)), axis=1)
        z = spec.sample_batch(m * n_points, rng).reshape(m, n_points, spec.d)
        out[start : start + m] = poisson_max(arrivals, z)
    return out


def sample_max_stable_batch(
    cfg: MaxStableConfig, n_draws: int, rng: np.random.Generator | None = None
) -> np.ndarray:
    """``n_draws`` standard max-stable vectors as an ``(n_draws, d)`` array.

    Draws whose truncated maximum has a zero component are redrawn with twice
    the number of points, at most three times.
    """
    if n_draws < 0:
        raise DNormError(f"n_draws must be >= 0, got {n_draws}")
    rng = rng if rng is not None else make_rng(cfg.seed)
    tops = _max_stable_rows(cfg.spec, n_draws, cfg.n_points, rng)
    n_points = cfg.n_points
    for _ in range(_MAX_RETRIES):
        bad = np.flatnonzero(np.any(tops <= 0, axis=1))
        if bad.size == 0:
            break
        n_points *= 2
        tops[bad] = _max_stable_rows(cfg.spec, bad.size, n_points, rng)
    if np.any(tops <= 0):
        raise NumericalError(
            f"a margin never received a positive generator value with up to {n_points} points"
        )
    return -1.0 / tops


def sample_max_stable(cfg: MaxStableConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    return sample_max_stable_batch(cfg, 1, rng)[0]


def _check_gpd_params(alpha: float, d: int) -> None:
    if not (alpha > 0 and math.isfinite(alpha)):
        raise DNormError(f"alpha must be > 0, got {alpha}")
    if d < 2:
        raise DNormError(f"d must be >= 2, got {d}")


def sample_gpd_batch(alpha: float, d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``Y = -U / Z`` with ``U`` uniform on (0, 1] and ``Z`` a Dirichlet(alpha) generator."""
    _check_gpd_params(alpha, d)
    spec = Dirichlet(d, alpha)
    z = spec.sample_batch(n, rng)
    u = 1.0 - rng.random(size=n)
    bad = np.flatnonzero(np.any(z <= 0, axis=1))
    for _ in range(100):
        if bad.size == 0:
            break
        z[bad] = spec.sample_batch(bad.size, rng)
        bad = bad[np.any(z[bad] <= 0, axis=1)]
    if bad.size:
        raise NumericalError("Dirichlet generator keeps producing zero components; alpha too small")
    return -u[:, None] / z


def sample_gpd(alpha: float, d: int, rng: np.random.Generator) -> np.ndarray:
    return sample_gpd_batch(alpha, d, 1, rng)[0]


def gpd_survivor(x, alpha: float, cfg: EstimationConfig | None = None) -> Estimate:
    """``P(Y > x) = E(min_i |x_i| V_i) / alpha`` for ``x <= 0`` with ``||x||_inf <= 1/d``."""
    x = as_point(x)
    d = x.size
    _check_gpd_params(alpha, d)
    if np.any(x > 0) or np.max(np.abs(x)) > 1.0 / d:
        raise DNormError(f"gpd_survivor needs x <= 0 with ||x||_inf <= 1/d = {1.0 / d:.6g}")
    cfg = cfg or EstimationConfig()
    with np.errstate(divide="ignore"):
        log_ax = np.log(np.abs(x))

    def draw(n, rng):
        return np.exp(np.min(log_ax + log_gamma_variates(alpha, (n, d), rng), axis=1)) / alpha

    (acc,) = run_streams(draw, cfg)
    return acc.estimate(cfg.seed)


def ks_critical_value(n: int, level: float = 0.01) -> float:
    """Exact two-sided one-sample KS critical value."""
    return float(stats.kstwo.isf(level, n))


def ks_margin_test(samples, margin: int) -> float:
    """KS distance between one margin and ``F(x) = exp(x)`` on ``x <= 0``."""
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2:
        raise DNormError(f"samples must be an (n, d) array, got shape {s.shape}")
    n = s.shape[0]
    if n < 100:
        raise DNormError(f"KS test needs at least 100 samples, got {n}")
    if not 0 <= margin < s.shape[1]:
        raise DNormError(f"margin {margin} out of range for d={s.shape[1]}")
    col = np.sort(s[:, margin])
    if np.any(col > 0):
        raise DNormError("samples must be <= 0")
    cdf = np.exp(col)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def empirical_df(samples: np.ndarray, point) -> tuple[float, float]:
    """Empirical ``P(eta <= point)`` and its binomial standard error."""
    s = np.asarray(samples, dtype=float)
    p = float(np.mean(np.all(s <= np.asarray(point, dtype=float), axis=1)))
    return p, math.sqrt(max(p * (1 - p), 0.0) / s.shape[0])


@dataclass(frozen=True)
class GridCheck:
    point: tuple[float, ...]
    observed: float
    expected: float
    std_error: float
    k: float

    @property
    def ok(self) -> bool:
        return abs(self.observed - self.expected) <= self.k * self.std_error


def df_grid_check(
    samples: np.ndarray, points: Sequence, df: Callable[[np.ndarray], float], k: float = 4.0
) -> list[GridCheck]:
    """Compare empirical df values with a reference df at each grid point.

    The binomial SE uses the reference probability, so a point where the
    reference is 0 or 1 must match exactly.
    """
    s = np.asarray(samples, dtype=float)
    out = []
    for pt in points:
        pt = np.asarray(pt, dtype=float)
        expected = float(df(pt))
        observed, _ = empirical_df(s, pt)
        se = math.sqrt(expected * (1 - expected) / s.shape[0])
        out.append(GridCheck(tuple(pt.tolist()), observed, expected, se, k))
    return out


def max_stability_check(samples: np.ndarray, n: int, points: Sequence, k: float = 4.0) -> list[GridCheck]:
    """Check ``G(x) = G**n(x/n)`` empirically.

    The samples are split in half: the first half estimates ``G`` directly, the
    second half is grouped into blocks of ``n`` whose componentwise maximum
    times ``n`` should again follow ``G``. SEs of the two independent
    proportions are combined.
    """
    s = np.asarray(samples, dtype=float)
    if n < 1:
        raise DNormError(f"block size must be >= 1, got {n}")
    half = s.shape[0] // 2
    single = s[:half]
    rest = s[half:]
    n_blocks = rest.shape[0] // n
    if n_blocks < 2:
        raise DNormError("not enough samples for the requested block size")
    blocks = n * rest[: n_blocks * n].reshape(n_blocks, n, s.shape[1]).max(axis=1)
    out = []
    for pt in points:
        pt = np.asarray(pt, dtype=float)
        p1, se1 = empirical_df(single, pt)
        p2, se2 = empirical_df(blocks, pt)
        pooled = (p1 * single.shape[0] + p2 * n_blocks) / (single.shape[0] + n_blocks)
        se = math.sqrt(pooled * (1 - pooled) * (1 / single.shape[0] + 1 / n_blocks))
        out.append(GridCheck(tuple(pt.tolist()), p2, p1, se, k))
    return out


def samples_to_csv(samples: np.ndarray, prefix: str = "eta") -> str:
    """CSV text with header ``prefix_1..prefix_d`` and 17 significant digits."""
    s = np.asarray(samples, dtype=float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{prefix}_{i + 1}" for i in range(s.shape[1])])
    for row in s:
        w.writerow([format(v, ".17g") for v in row])
    return buf.getvalue()
