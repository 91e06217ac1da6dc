"""Doubly stochastic matrices acting on generators.

For a doubly stochastic ``M`` and a generator ``Z`` with ``||Z||_1 = d``,
``M Z`` is again such a generator. If some power of ``M`` is entrywise
positive the iterates ``M^n Z`` collapse to ``(1, ..., 1)``, i.e. the
D-norms approach the sup-norm.
"""

from __future__ import annotations

import csv
import io
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dnorm.core import DNormError, Estimate, as_point

__all__ = [
    "DoublyStochasticMatrix",
    "DoublyStochasticError",
    "validate",
    "uniform_matrix",
    "circulant",
    "matrix_power",
    "is_primitive",
    "stationary_distribution",
    "spread",
    "collapse_envelope",
    "iterate_generator",
    "continuity_bound",
    "load_matrix",
]

SUM_TOL = 1e-10
POWER_TOL = 1e-8
POSITIVE_TOL = 1e-12


class DoublyStochasticError(DNormError):
    """Matrix fails the doubly stochastic constraints; ``violations`` lists them."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("not doubly stochastic: " + "; ".join(violations))


@dataclass(frozen=True, eq=False)
class DoublyStochasticMatrix:
    entries: np.ndarray

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        return isinstance(other, DoublyStochasticMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())


def validate(matrix, tol: float = SUM_TOL) -> DoublyStochasticMatrix:
    """Wrap ``matrix`` after checking nonnegativity and unit row/column sums."""
    m = np.array(np.asarray(matrix), dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise DNormError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DNormError("matrix entries must be finite")
    problems = []
    for i, j in zip(*np.nonzero(m < 0)):
        problems.append(f"negative entry m[{i}][{j}] = {m[i, j]!r}")
    for i, s in enumerate(m.sum(axis=1)):
        if abs(s - 1.0) > tol:
            problems.append(f"row {i} sums to {s!r}")
    for j, s in enumerate(m.sum(axis=0)):
        if abs(s - 1.0) > tol:
            problems.append(f"column {j} sums to {s!r}")
    if problems:
        raise DoublyStochasticError(problems)
    m.setflags(write=False)
    return DoublyStochasticMatrix(m)


def uniform_matrix(d: int) -> DoublyStochasticMatrix:
    """``M_0``: every entry ``1/d``."""
    return validate(np.full((d, d), 1.0 / d))


def circulant(first_row) -> DoublyStochasticMatrix:
    row = np.asarray(first_row, dtype=float)
    return validate(np.stack([np.roll(row, k) for k in range(row.size)]))


def _entries(matrix) -> np.ndarray:
    if isinstance(matrix, DoublyStochasticMatrix):
        return matrix.entries
    return validate(matrix).entries


def matrix_power(matrix, n: int) -> DoublyStochasticMatrix:
    """``M**n`` by repeated squaring, revalidated at a looser tolerance."""
    if n < 0:
        raise DNormError(f"power must be >= 0, got {n}")
    m = _entries(matrix)
    result = np.eye(m.shape[0])
    base = m
    while n:
        if n & 1:
            result = result @ base
        n >>= 1
        if n:
            base = base @ base
    return validate(result, tol=POWER_TOL)


def is_primitive(matrix, tol: float = POSITIVE_TOL) -> tuple[bool, int | None]:
    """Smallest ``n <= (d-1)**2 + 1`` with every entry of ``M**n`` above ``tol``.

    Wielandt's bound makes the search exhaustive. Returns ``(False, None)``
    when no such power exists.
    """
    m = _entries(matrix)
    d = m.shape[0]
    p = m.copy()
    for n in range(1, (d - 1) ** 2 + 2):
        if np.all(p > tol):
            return True, n
        p = p @ m
    return False, None


def stationary_distribution(matrix) -> np.ndarray:
    """Uniform stationary law of a primitive doubly stochastic matrix.

    The uniform vector is checked against ``mu M = mu`` and against the rows of
    a high power of ``M``.
    """
    m = _entries(matrix)
    primitive, _ = is_primitive(m)
    if not primitive:
        raise DNormError("stationary distribution is unique only for primitive matrices")
    d = m.shape[0]
    mu = np.full(d, 1.0 / d)
    if np.max(np.abs(mu @ m - mu)) > 1e-10:
        raise DNormError("uniform vector is not invariant; matrix is not doubly stochastic")
    p = m
    for _ in range(64):
        if spread(p) < 1e-12:
            break
        p = p @ p
    if np.max(np.abs(p - mu[None, :])) > 1e-8:
        raise DNormError("power iteration did not reach the uniform law")
    return mu


def spread(matrix) -> float:
    """``max_i max_{j,j'} |M(i,j) - M(i,j')|``."""
    m = np.asarray(matrix, dtype=float)
    return float(np.max(m.max(axis=1) - m.min(axis=1)))


def collapse_envelope(matrix, n: int) -> float:
    """Bound on ``||M**n Z - 1||_inf`` for generators with ``||Z||_1 = d``.

    ``(M**n Z)_i - 1 = sum_j (M**n(i,j) - 1/d) Z_j`` and each coefficient is at
    most the row spread in absolute value, so the error is at most
    ``d * spread(M**n)``.
    """
    p = matrix_power(matrix, n)
    return p.d * spread(p.entries)


def iterate_generator(matrix, spec, n_max: int, x, cfg=None) -> list[Estimate]:
    """Estimates of ``||x||`` under the generators ``M**n Z``, ``n = 0..n_max``.

    Every step reuses ``cfg``'s seed, so the sequence is driven by common
    random numbers.
    """
    from dnorm.generators import matrix_apply
    from dnorm.montecarlo import EstimationConfig, estimate_dnorm

    cfg = cfg or EstimationConfig()
    m = matrix if isinstance(matrix, DoublyStochasticMatrix) else validate(matrix)
    x = as_point(x)
    if m.d != spec.d or x.size != spec.d:
        raise DNormError(f"dimension mismatch: matrix {m.d}, generator {spec.d}, point {x.size}")
    if n_max < 0:
        raise DNormError(f"n_max must be >= 0, got {n_max}")
    if not is_primitive(m)[0]:
        warnings.warn("matrix is not primitive; the iteration need not approach the sup-norm", stacklevel=2)
    out = []
    power = validate(np.eye(m.d))
    for n in range(n_max + 1):
        if n > 0:
            power = validate(power.entries @ m.entries, tol=POWER_TOL)
        out.append(estimate_dnorm(matrix_apply(power, spec), x, cfg))
    return out


def continuity_bound(m1, m2, dist_ab: float) -> float:
    """``||M1 - M2||_1 + d * dist_ab``: bound on the distance between transformed D-norms."""
    a, b = _entries(m1), _entries(m2)
    if a.shape != b.shape:
        raise DNormError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if dist_ab < 0:
        raise DNormError(f"distance must be >= 0, got {dist_ab}")
    return float(np.abs(a - b).sum() + a.shape[0] * dist_ab)


def load_matrix(path) -> DoublyStochasticMatrix:
    """Read a matrix from JSON (``[[...], ...]``) or CSV (one row per line)."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    try:
        if stripped.startswith("["):
            rows = json.loads(text)
        else:
            rows = [[float(v) for v in r] for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        arr = np.asarray(rows, dtype=float)
    except ValueError as exc:
        raise DNormError(f"cannot parse matrix in {path}: {exc}") from None
    return validate(arr)
