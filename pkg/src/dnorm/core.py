"""Value types and exact closed-form norms.

A D-norm is ``||x||_D = E(max_i |x_i| Z_i)`` for a nonnegative random vector
``Z`` with unit component means. The sup-norm, the L1-norm and the logistic
norms are the closed-form members used throughout the package as oracles.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "DNormError",
    "NumericalError",
    "Estimate",
    "Dependence",
    "INF",
    "as_point",
    "as_nonneg",
    "sup_norm",
    "l1_norm",
    "logistic_norm",
    "sms_df",
    "takahashi_classify",
]


class DNormError(ValueError):
    """Raised when an input violates a documented precondition."""


class NumericalError(RuntimeError):
    """Raised when a numerical procedure cannot produce a trustworthy result."""


# Sentinel for lambda = +infinity in logistic_norm; dispatches to the sup-norm.
INF = math.inf

PointLike = Union[Sequence[float], np.ndarray]


def as_point(x: PointLike) -> np.ndarray:
    """Return ``x`` as a finite 1-d float array with at least one entry."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DNormError(f"a point must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DNormError("a point must have finite coordinates")
    return arr


def as_nonneg(z: PointLike) -> np.ndarray:
    arr = as_point(z)
    if np.any(arr < 0):
        raise DNormError("a generator realization must be nonnegative")
    return arr


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo result.

    ``std_error`` is the unbiased sample standard deviation divided by
    ``sqrt(n_samples)``, computed from the same draws as ``value``.
    """

    value: float
    std_error: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.std_error < 0 or not math.isfinite(self.std_error):
            raise DNormError(f"std_error must be finite and >= 0, got {self.std_error}")
        if self.n_samples < 1:
            raise DNormError(f"n_samples must be positive, got {self.n_samples}")

    def interval(self, k: float = 3.0) -> tuple[float, float]:
        """Symmetric band ``value -/+ k * std_error``."""
        return self.value - k * self.std_error, self.value + k * self.std_error

    def covers(self, target: float, k: float = 3.0) -> bool:
        lo, hi = self.interval(k)
        return lo <= target <= hi

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n": self.n_samples,
            "seed": self.seed,
        }


class Dependence(enum.Enum):
    COMPLETE_DEPENDENCE = "complete_dependence"
    INDEPENDENCE = "independence"
    INTERMEDIATE = "intermediate"


def sup_norm(x: PointLike) -> float:
    return float(np.max(np.abs(as_point(x))))


def l1_norm(x: PointLike) -> float:
    return float(np.sum(np.abs(as_point(x))))


def logistic_norm(x: PointLike, lam: float) -> float:
    """``(sum |x_i|**lam)**(1/lam)`` for ``lam >= 1``; ``lam = INF`` is the sup-norm.

    The sum is taken over ``|x_i| / max|x_i|`` so large ``lam`` cannot overflow.
    """
    x = as_point(x)
    if math.isnan(lam) or lam < 1:
        raise DNormError(f"logistic norm needs lambda >= 1, got {lam}")
    if math.isinf(lam):
        return sup_norm(x)
    if lam == 1:
        return l1_norm(x)
    a = np.abs(x)
    top = float(a.max())
    if top == 0.0:
        return 0.0
    return top * float(np.sum((a / top) ** lam)) ** (1.0 / lam)


def sms_df(x: PointLike, dnorm_value: float) -> float:
    """Standard max-stable df ``G(x) = exp(-||x||_D)`` for ``x <= 0``.

    The caller supplies ``||x||_D`` so any norm (exact or estimated) can be
    plugged in.
    """
    x = as_point(x)
    if np.any(x > 0):
        raise DNormError("sms_df is defined for x <= 0 only")
    if not dnorm_value >= 0:
        raise DNormError(f"D-norm value must be >= 0, got {dnorm_value}")
    return math.exp(-dnorm_value)


def takahashi_classify(extremal_coeff: float, d: int, tol: float) -> Dependence:
    """Classify dependence of the margins from the extremal coefficient ``||1||_D``.

    ``d`` means independence (the D-norm is L1), ``1`` complete dependence
    (the sup-norm). ``tol`` has no default: an exact coefficient and a Monte
    Carlo one call for very different tolerances.
    """
    if d < 1:
        raise DNormError(f"dimension must be >= 1, got {d}")
    if tol < 0:
        raise DNormError(f"tol must be >= 0, got {tol}")
    if not (1 - tol <= extremal_coeff <= d + tol):
        raise DNormError(
            f"extremal coefficient {extremal_coeff} outside [1, {d}] (tol {tol})"
        )
    if abs(extremal_coeff - d) <= tol:
        return Dependence.INDEPENDENCE
    if abs(extremal_coeff - 1) <= tol:
        return Dependence.COMPLETE_DEPENDENCE
    return Dependence.INTERMEDIATE
