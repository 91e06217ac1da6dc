"""Generators of D-norms: specs, sampling, transforms and standardization.

Every spec samples a nonnegative vector ``Z`` with ``E(Z_i) = 1``. Sampling
is vectorized: ``spec.sample_batch(n, rng)`` returns an ``(n, d)`` array and
consumes the generator's randomness in a fixed order, so equal seeds give
bit-identical draws.

Randomness contract: every sampler takes an explicit ``numpy.random.Generator``.
Parallel streams are derived from a master seed by :func:`stream_rngs`:
stream ``k`` is seeded with ``splitmix64(seed ^ k)``.
"""

from __future__ import annotations

import abc
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from dnorm.core import DNormError, as_point

__all__ = [
    "DEFAULT_SEED",
    "DegenerateGeneratorError",
    "splitmix64",
    "make_rng",
    "stream_rngs",
    "log_gamma_variates",
    "gamma_variates",
    "DiscreteMeasure",
    "GeneratorSpec",
    "Constant",
    "ScaledPermutation",
    "FrechetLogistic",
    "Dirichlet",
    "Product",
    "MatrixTransformed",
    "Discrete",
    "simplex_from_log",
    "sample",
    "product",
    "matrix_apply",
    "standardize",
    "GeneratorReport",
    "validate_generator",
]

DEFAULT_SEED = 20161016
_MASK64 = (1 << 64) - 1

# On-simplex and probability-sum tolerances for DiscreteMeasure.
SIMPLEX_TOL = 1e-9
WEIGHT_TOL = 1e-12


class DegenerateGeneratorError(DNormError):
    """A generator produced a realization with ``||Z||_1 = 0``."""


def splitmix64(x: int) -> int:
    """One round of the SplitMix64 finalizer (a bijective 64-bit mixing hash)."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def make_rng(seed: int) -> np.random.Generator:
    if not 0 <= seed <= _MASK64:
        raise DNormError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def stream_rngs(seed: int, n_streams: int) -> list[np.random.Generator]:
    """Independent generators for ``n_streams`` parallel partitions of ``seed``."""
    if n_streams < 1:
        raise DNormError(f"n_streams must be >= 1, got {n_streams}")
    if not 0 <= seed <= _MASK64:
        raise DNormError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return [make_rng(splitmix64(seed ^ k)) for k in range(n_streams)]


def log_gamma_variates(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Logarithms of standard gamma(alpha) variates.

    ``alpha >= 1`` uses numpy's Marsaglia-Tsang sampler. ``alpha < 1`` uses the
    boost ``gamma(alpha + 1) * U**(1/alpha)``, kept on the log scale because
    ``U**(1/alpha)`` underflows for small ``alpha``.
    """
    if not alpha > 0:
        raise DNormError(f"gamma shape must be > 0, got {alpha}")
    if alpha >= 1:
        return np.log(rng.standard_gamma(alpha, size=size))
    g = rng.standard_gamma(alpha + 1.0, size=size)
    u = 1.0 - rng.random(size=size)  # (0, 1]
    return np.log(g) + np.log(u) / alpha


def gamma_variates(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    return np.exp(log_gamma_variates(alpha, size, rng))


def _check_n(n: int) -> None:
    if n < 0:
        raise DNormError(f"sample count must be >= 0, got {n}")


# --------------------------------------------------------------------------
# Discrete measures on the simplex S_d = {x >= 0 : ||x||_1 = d}
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure on ``S_d``.

    ``atoms`` has shape ``(m, d)``, ``weights`` shape ``(m,)``. Used as a
    generator only when the barycenter is ``(1, ..., 1)``; see
    :meth:`is_generator`.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=float, ndmin=2)
        weights = np.array(self.weights, dtype=float, ndmin=1)
        if atoms.ndim != 2 or atoms.shape[0] == 0 or atoms.shape[1] == 0:
            raise DNormError(f"atoms must be a non-empty (m, d) array, got {atoms.shape}")
        if weights.shape != (atoms.shape[0],):
            raise DNormError(
                f"need one weight per atom: {atoms.shape[0]} atoms, {weights.shape} weights"
            )
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(weights))):
            raise DNormError("atoms and weights must be finite")
        if np.any(atoms < 0):
            raise DNormError("atoms must be nonnegative")
        d = atoms.shape[1]
        off = np.abs(atoms.sum(axis=1) - d)
        if np.any(off > SIMPLEX_TOL):
            bad = int(np.argmax(off))
            raise DNormError(f"atom {bad} has ||atom||_1 = {atoms[bad].sum()!r}, expected {d}")
        if np.any(weights < 0):
            raise DNormError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise DNormError(f"weights sum to {weights.sum()!r}, expected 1")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @property
    def d(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def barycenter(self) -> np.ndarray:
        return self.weights @ self.atoms

    def is_generator(self, tol: float = SIMPLEX_TOL) -> bool:
        return bool(np.all(np.abs(self.barycenter() - 1.0) <= tol))

    def dnorm(self, x) -> float:
        """Exact ``sum_k w_k max_i |x_i| atom_k[i]``."""
        x = as_point(x)
        if x.size != self.d:
            raise DNormError(f"dimension mismatch: point has {x.size}, measure has {self.d}")
        return float(self.weights @ np.max(np.abs(x) * self.atoms, axis=1))

    def merged(self, tol: float = 0.0) -> "DiscreteMeasure":
        """Merge atoms that agree within ``tol`` (max-abs), summing their weights.

        Output atoms are in lexicographic order, so the result does not depend
        on the input order.
        """
        order = np.lexsort(self.atoms.T[::-1])
        atoms = self.atoms[order]
        weights = self.weights[order]
        if tol == 0.0:
            uniq, inverse = np.unique(atoms, axis=0, return_inverse=True)
            w = np.bincount(inverse.ravel(), weights=weights, minlength=uniq.shape[0])
            return DiscreteMeasure(uniq, w / w.sum())
        keep_atoms = [atoms[0]]
        keep_w = [weights[0]]
        for a, w in zip(atoms[1:], weights[1:]):
            if np.max(np.abs(a - keep_atoms[-1])) <= tol:
                keep_w[-1] += w
            else:
                keep_atoms.append(a)
                keep_w.append(w)
        w = np.array(keep_w)
        return DiscreteMeasure(np.array(keep_atoms), w / w.sum())

    def to_dict(self) -> dict:
        return {"d": self.d, "atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, obj: dict) -> "DiscreteMeasure":
        try:
            d, atoms, weights = obj["d"], obj["atoms"], obj["weights"]
        except (KeyError, TypeError) as exc:
            raise DNormError(f"measure JSON needs keys d, atoms, weights: {exc}") from None
        m = cls(np.asarray(atoms, dtype=float), np.asarray(weights, dtype=float))
        if m.d != d:
            raise DNormError(f"declared d={d} but atoms have {m.d} coordinates")
        return m

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        return cls.from_dict(json.loads(text))

    @classmethod
    def point_mass(cls, atom: Sequence[float]) -> "DiscreteMeasure":
        return cls(np.asarray([atom], dtype=float), np.ones(1))

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure":
        atoms = np.asarray(atoms, dtype=float)
        return cls(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))


# --------------------------------------------------------------------------
# Generator specs
# --------------------------------------------------------------------------


class GeneratorSpec(abc.ABC):
    """Description of a generator ``Z``; subclasses implement ``sample_batch``."""

    d: int

    @abc.abstractmethod
    def sample_batch(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n`` independent realizations as an ``(n, d)`` array."""

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.sample_batch(1, rng)[0]

    @property
    def on_simplex(self) -> bool:
        """True when ``||Z||_1 = d`` holds almost surely."""
        return False


def _check_dim(d: int) -> None:
    if not isinstance(d, (int, np.integer)) or d < 1:
        raise DNormError(f"dimension must be a positive integer, got {d!r}")


@dataclass(frozen=True)
class Constant(GeneratorSpec):
    """``Z = (1, ..., 1)``; generates the sup-norm."""

    d: int

    def __post_init__(self):
        _check_dim(self.d)

    def sample_batch(self, n, rng):
        _check_n(n)
        return np.ones((n, self.d))

    @property
    def on_simplex(self):
        return True


@dataclass(frozen=True)
class ScaledPermutation(GeneratorSpec):
    """Uniformly random permutation of ``(d, 0, ..., 0)``; generates the L1-norm."""

    d: int

    def __post_init__(self):
        _check_dim(self.d)

    def sample_batch(self, n, rng):
        _check_n(n)
        out = np.zeros((n, self.d))
        out[np.arange(n), rng.integers(0, self.d, size=n)] = float(self.d)
        return out

    @property
    def on_simplex(self):
        return True


@dataclass(frozen=True)
class FrechetLogistic(GeneratorSpec):
    """``Z_i = X_i / Gamma(1 - 1/lam)`` with iid Frechet(lam) ``X_i``; generates
    the logistic norm ``||.||_lam``.

    ``X_i = (-ln U_i)**(-1/lam)`` by inverse transform. The variance of ``Z_i``
    is infinite for ``lam <= 2``.
    """

    d: int
    lam: float

    def __post_init__(self):
        _check_dim(self.d)
        if not (self.lam > 1 and math.isfinite(self.lam)):
            raise DNormError(f"Frechet generator needs 1 < lambda < inf, got {self.lam}")

    def sample_batch(self, n, rng):
        _check_n(n)
        u = rng.random(size=(n, self.d))
        with np.errstate(divide="ignore"):
            x = (-np.log(u)) ** (-1.0 / self.lam)
        return x / math.gamma(1.0 - 1.0 / self.lam)


@dataclass(frozen=True)
class Dirichlet(GeneratorSpec):
    """``Z = d * V / sum(V)`` with iid gamma(alpha) ``V_i``."""

    d: int
    alpha: float

    def __post_init__(self):
        _check_dim(self.d)
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise DNormError(f"Dirichlet generator needs alpha > 0, got {self.alpha}")

    def sample_batch(self, n, rng):
        _check_n(n)
        if self.alpha >= 1:
            v = rng.standard_gamma(self.alpha, size=(n, self.d))
            return self.d * v / v.sum(axis=1, keepdims=True)
        return simplex_from_log(log_gamma_variates(self.alpha, (n, self.d), rng))

    @property
    def on_simplex(self):
        return True


def simplex_from_log(log_v: np.ndarray) -> np.ndarray:
    """Map rows of ``log V`` to ``d * V / sum(V)`` without under/overflow."""
    d = log_v.shape[-1]
    shifted = np.exp(log_v - np.max(log_v, axis=-1, keepdims=True))
    return d * shifted / shifted.sum(axis=-1, keepdims=True)


@dataclass(frozen=True)
class Product(GeneratorSpec):
    """Componentwise product of independent draws from two generators."""

    first: GeneratorSpec
    second: GeneratorSpec

    def __post_init__(self):
        if self.first.d != self.second.d:
            raise DNormError(
                f"product needs equal dimensions, got {self.first.d} and {self.second.d}"
            )

    @property
    def d(self):
        return self.first.d

    def sample_batch(self, n, rng):
        return self.first.sample_batch(n, rng) * self.second.sample_batch(n, rng)


@dataclass(frozen=True, eq=False)
class MatrixTransformed(GeneratorSpec):
    """``Z_M = M Z`` for a doubly stochastic ``M``."""

    matrix: object
    inner: GeneratorSpec

    def __post_init__(self):
        from dnorm.markov import DoublyStochasticMatrix, validate

        m = self.matrix
        if not isinstance(m, DoublyStochasticMatrix):
            m = validate(m)
        if m.d != self.inner.d:
            raise DNormError(f"matrix is {m.d}x{m.d} but generator has dimension {self.inner.d}")
        object.__setattr__(self, "matrix", m)

    @property
    def d(self):
        return self.inner.d

    def sample_batch(self, n, rng):
        return self.inner.sample_batch(n, rng) @ self.matrix.entries.T

    @property
    def on_simplex(self):
        return self.inner.on_simplex

    def __eq__(self, other):
        return (
            isinstance(other, MatrixTransformed)
            and self.inner == other.inner
            and np.array_equal(self.matrix.entries, other.matrix.entries)
        )

    def __hash__(self):
        return hash((self.inner, self.matrix.entries.tobytes()))


@dataclass(frozen=True, eq=False)
class Discrete(GeneratorSpec):
    """Generator drawn from a finitely supported measure on ``S_d``."""

    measure: DiscreteMeasure

    def __post_init__(self):
        if not self.measure.is_generator():
            raise DNormError(
                f"measure barycenter {self.measure.barycenter()} is not (1, ..., 1)"
            )

    @property
    def d(self):
        return self.measure.d

    def sample_batch(self, n, rng):
        _check_n(n)
        idx = rng.choice(self.measure.size, size=n, p=self.measure.weights)
        return self.measure.atoms[idx]

    @property
    def on_simplex(self):
        return True

    def __eq__(self, other):
        return (
            isinstance(other, Discrete)
            and np.array_equal(self.measure.atoms, other.measure.atoms)
            and np.array_equal(self.measure.weights, other.measure.weights)
        )

    def __hash__(self):
        return hash((self.measure.atoms.tobytes(), self.measure.weights.tobytes()))


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


def sample(spec: GeneratorSpec, rng: np.random.Generator) -> np.ndarray:
    return spec.sample(rng)


def product(spec1: GeneratorSpec, spec2: GeneratorSpec) -> Product:
    return Product(spec1, spec2)


def matrix_apply(matrix, spec: GeneratorSpec) -> MatrixTransformed:
    return MatrixTransformed(matrix, spec)


def standardize(spec: GeneratorSpec, n: int, rng: np.random.Generator) -> DiscreteMeasure:
    """Empirical standardized generator: atoms on ``S_d`` with size-biased weights.

    Each draw ``Z`` becomes the atom ``d Z / ||Z||_1`` with weight proportional
    to ``||Z||_1``. This change of measure keeps the unit means and the D-norm.
    Exactly equal atoms are merged.
    """
    if n < 1:
        raise DNormError(f"standardize needs n >= 1, got {n}")
    z = spec.sample_batch(n, rng)
    norms = z.sum(axis=1)
    if np.any(norms <= 0):
        k = int(np.argmax(norms <= 0))
        raise DegenerateGeneratorError(f"draw {k} has ||Z||_1 = 0; not a valid generator sample")
    atoms = spec.d * z / norms[:, None]
    weights = norms / norms.sum()
    return DiscreteMeasure(atoms, weights / weights.sum()).merged()


@dataclass(frozen=True)
class GeneratorReport:
    means: np.ndarray
    std_errors: np.ndarray
    z_scores: np.ndarray
    flagged: tuple[int, ...]
    negative_samples: int
    n: int
    z_threshold: float

    @property
    def passed(self) -> bool:
        return not self.flagged and self.negative_samples == 0

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        zs = ", ".join(f"{z:+.2f}" for z in self.z_scores)
        return f"{status}: n={self.n} z=[{zs}] flagged={list(self.flagged)} negative={self.negative_samples}"


def validate_generator(
    spec: GeneratorSpec, n: int, rng: np.random.Generator, z_threshold: float = 4.0
) -> GeneratorReport:
    """Check ``Z >= 0`` and ``E(Z_i) = 1`` by per-component z-scores."""
    if n < 100:
        raise DNormError(f"validate_generator needs n >= 100, got {n}")
    z = spec.sample_batch(n, rng)
    means = z.mean(axis=0)
    se = z.std(axis=0, ddof=1) / math.sqrt(n)
    dev = means - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(se > 0, dev / se, np.where(dev == 0, 0.0, np.sign(dev) * np.inf))
    flagged = tuple(int(i) for i in np.flatnonzero(np.abs(scores) > z_threshold))
    negatives = int(np.count_nonzero(np.any(z < 0, axis=1)))
    return GeneratorReport(means, se, scores, flagged, negatives, n, z_threshold)
