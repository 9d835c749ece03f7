"""Points on the probability simplex, test weights, and exact multinomial sampling.

Every constructor returns an immutable object whose invariants were checked at
construction time: probability vectors are non-negative and sum to one within
``SIMPLEX_TOL``; weight vectors are strictly positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, InvalidDimensionError, ValidationError, ZeroWeightError

SIMPLEX_TOL = 1e-12

WEIGHT_KINDS = ("identity", "pi0_inverse", "mixture", "truncated", "lp", "custom")


def _frozen(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProbVector:
    """A probability vector on ``d`` bins.

    Use :meth:`from_values` to build one from unnormalized input; the plain
    constructor only accepts vectors that already sum to one.
    """

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1 or v.size == 0:
            raise InvalidDimensionError("probability vector must be one-dimensional with d >= 1")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError("probability entries must be finite and non-negative")
        total = math.fsum(v)
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise DomainError(f"probability vector sums to {total!r}, not 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_values(cls, values: Sequence[float], tol: float | None = None) -> "ProbVector":
        """Renormalize ``values`` onto the simplex.

        If ``tol`` is given, the raw sum must already be within ``tol`` of one.
        """
        v = np.asarray(values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise InvalidDimensionError("probability vector must be one-dimensional with d >= 1")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError("probability entries must be finite and non-negative")
        total = math.fsum(v)
        if total <= 0:
            raise DomainError("probability vector has zero total mass")
        if tol is not None and abs(total - 1.0) > tol:
            raise DomainError(f"probability vector sums to {total!r}, outside tolerance {tol:g}")
        return cls(v / total)

    @property
    def d(self) -> int:
        return int(self.values.size)

    def __len__(self):
        return self.d

    def __eq__(self, other):
        if not isinstance(other, ProbVector):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())

    def __repr__(self):
        return f"ProbVector(d={self.d})"


@dataclass(frozen=True, eq=False)
class WeightVector:
    """Strictly positive per-bin weights ``w``; the test matrix is ``diag(1/w)``.

    ``kind`` is one of :data:`WEIGHT_KINDS`; ``param`` holds gamma for
    ``mixture`` and p for ``lp``.
    """

    w: np.ndarray
    kind: str = "custom"
    param: float | None = None

    def __post_init__(self):
        w = _frozen(self.w)
        if w.ndim != 1 or w.size == 0:
            raise InvalidDimensionError("weight vector must be one-dimensional with d >= 1")
        if self.kind not in WEIGHT_KINDS:
            raise ValidationError(f"unknown weight kind {self.kind!r}")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        if np.any(w <= 0):
            raise ZeroWeightError("weights must be strictly positive")
        object.__setattr__(self, "w", w)
        a = _frozen(1.0 / w)
        object.__setattr__(self, "a", a)

    @property
    def d(self) -> int:
        return int(self.w.size)

    @property
    def provenance(self) -> str:
        if self.kind == "mixture":
            return f"mixture({self.param:g})"
        if self.kind == "lp":
            return "lp(inf)" if math.isinf(self.param) else f"lp({self.param:g})"
        return self.kind

    def __eq__(self, other):
        if not isinstance(other, WeightVector):
            return NotImplemented
        return self.provenance == other.provenance and np.array_equal(self.w, other.w)

    def __hash__(self):
        return hash((self.provenance, self.w.tobytes()))

    def __repr__(self):
        return f"WeightVector(d={self.d}, provenance={self.provenance!r})"


@dataclass(frozen=True, eq=False)
class CountVector:
    """Observed bin counts ``Y`` with ``n = sum(Y)``."""

    counts: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        raw = np.asarray(self.counts)
        if raw.ndim != 1 or raw.size == 0:
            raise InvalidDimensionError("counts must be one-dimensional with d >= 1")
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise DomainError("counts must be integers")
        elif raw.dtype.kind not in "iub":
            raise DomainError("counts must be integers")
        c = _frozen(raw, dtype=np.int64)
        if np.any(c < 0):
            raise DomainError("counts must be non-negative")
        n = int(c.sum())
        if n < 1:
            raise DomainError("counts must contain at least one observation")
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "n", n)

    @property
    def d(self) -> int:
        return int(self.counts.size)

    def __eq__(self, other):
        if not isinstance(other, CountVector):
            return NotImplemented
        return np.array_equal(self.counts, other.counts)

    def __hash__(self):
        return hash(self.counts.tobytes())

    def __repr__(self):
        return f"CountVector(d={self.d}, n={self.n})"


# -- null / alternative generators -------------------------------------------

def uniform(d: int) -> ProbVector:
    return power_law(d, 0.0)


def power_law(d: int, r: float) -> ProbVector:
    """Bin ``i`` (1-indexed) gets mass proportional to ``i**r``."""
    if int(d) != d or d < 1:
        raise InvalidDimensionError(f"d must be a positive integer, got {d!r}")
    if not r >= 0:
        raise DomainError(f"power-law exponent must be >= 0, got {r!r}")
    idx = np.arange(1, int(d) + 1, dtype=np.float64)
    return ProbVector.from_values(idx ** float(r))


def piecewise_uniform(d: int, omega1: float) -> ProbVector:
    """First half of the bins at ``omega1/d``, second half at ``(2 - omega1)/d``."""
    if int(d) != d or d < 2 or d % 2:
        raise InvalidDimensionError(f"piecewise_uniform needs an even d >= 2, got {d!r}")
    if not 0 < omega1 < 2:
        raise DomainError(f"omega1 must lie in (0, 2), got {omega1!r}")
    half = int(d) // 2
    vals = np.concatenate([np.full(half, omega1 / d), np.full(half, (2.0 - omega1) / d)])
    return ProbVector.from_values(vals)


# -- weights -----------------------------------------------------------------

def identity_weight(d: int) -> WeightVector:
    return WeightVector(np.ones(int(d)), kind="identity")


def pi0_weight(pi0: ProbVector) -> WeightVector:
    """``w = pi0``, i.e. the chi-square scaling ``a_j = 1/pi0_j``."""
    if np.any(pi0.values == 0):
        raise ZeroWeightError("pi0 has a zero entry; 1/pi0 weights are undefined")
    return WeightVector(pi0.values, kind="pi0_inverse")


def _mix(pi0: ProbVector, gamma: float) -> np.ndarray:
    return gamma * pi0.values + (1.0 - gamma) / pi0.d


def mixture_weight(pi0: ProbVector, gamma: float = 0.5) -> WeightVector:
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    return WeightVector(_mix(pi0, gamma), kind="mixture", param=float(gamma))


def truncated_weight(pi0: ProbVector) -> WeightVector:
    return WeightVector(np.maximum(pi0.values, 1.0 / pi0.d), kind="truncated")


def lp_mixture_weight(pi0: ProbVector, p: float) -> WeightVector:
    """Power mean of order ``p`` between ``pi0`` and the uniform vector."""
    if not p >= 1:
        raise DomainError(f"p must be >= 1 or infinity, got {p!r}")
    if math.isinf(p):
        w = np.maximum(pi0.values, 1.0 / pi0.d)
    elif p == 1:
        w = _mix(pi0, 0.5)
    else:
        u = 1.0 / pi0.d
        # factor out the larger entry so high p cannot underflow
        big = np.maximum(pi0.values, u)
        ratio_a = pi0.values / big
        ratio_b = u / big
        w = big * ((ratio_a ** p + ratio_b ** p) / 2.0) ** (1.0 / p)
    return WeightVector(w, kind="lp", param=float(p))


def make_weight(kind: str, pi0: ProbVector, param: float | None = None) -> WeightVector:
    """Build a named weight for ``pi0``; ``kind`` as in :data:`WEIGHT_KINDS`."""
    if kind == "identity":
        return identity_weight(pi0.d)
    if kind == "pi0_inverse":
        return pi0_weight(pi0)
    if kind == "mixture":
        return mixture_weight(pi0, 0.5 if param is None else param)
    if kind == "truncated":
        return truncated_weight(pi0)
    if kind == "lp":
        if param is None:
            raise ValidationError("lp weight needs a p parameter")
        return lp_mixture_weight(pi0, param)
    raise ValidationError(f"unknown weight kind {kind!r}")


def comparability_constants(w: WeightVector, pi0: ProbVector, gamma: float) -> tuple[float, float]:
    """Tightest ``(C1, C2)`` with ``C1 * mix <= w <= C2 * mix`` entrywise."""
    if w.d != pi0.d:
        raise InvalidDimensionError("weight and pi0 dimensions differ")
    if not 0 < gamma < 1:
        raise DomainError(f"gamma must lie in (0, 1), got {gamma!r}")
    ratio = w.w / _mix(pi0, gamma)
    return float(ratio.min()), float(ratio.max())


# -- sampling ----------------------------------------------------------------

def replicate_stream(seed: int, *path: int) -> np.random.Generator:
    """Independent PCG64 stream for ``(seed, *path)``.

    The words are hashed by :class:`numpy.random.SeedSequence`, so stream
    ``(seed, s, i)`` depends only on those integers and never on the order in
    which replicates are executed.
    """
    words = [int(seed)] + [int(p) for p in path]
    if any(x < 0 for x in words):
        raise DomainError("seed and stream path must be non-negative integers")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(words)))


def sample_counts(pi: ProbVector, n: int, rng: np.random.Generator) -> CountVector:
    """Exact multinomial(n, pi) draw.

    NumPy's multinomial walks the bins once, drawing each count from a binomial
    conditional on the mass already placed.
    """
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    return CountVector(rng.multinomial(int(n), pi.values))


def sample_count_matrix(pi: ProbVector, n: int, seed: int, scenario: int,
                        start: int, stop: int) -> np.ndarray:
    """Counts for replicates ``start..stop-1`` of one scenario, one row each."""
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    out = np.empty((stop - start, pi.d), dtype=np.int64)
    for row, rep in enumerate(range(start, stop)):
        out[row] = replicate_stream(seed, scenario, rep).multinomial(int(n), pi.values)
    return out
