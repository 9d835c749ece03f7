"""Goodness-of-fit statistics computed from bin counts, plus their moments.

Every U-statistic is evaluated in O(d) from the counts. For ``A = diag(a)``
and ``a = 1/w``,

    C(n, 2) * U_A = 1/2 * [ sum_j a_j Y_j (Y_j - 1)
                            - 2 (n - 1) sum_j a_j pi0_j Y_j
                            + n (n - 1) sum_j a_j pi0_j^2 ],

which is the full double sum over ordered pairs minus its diagonal. The
pairwise functions evaluate the kernel literally and exist to check it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .distributions import (
    CountVector,
    ProbVector,
    WeightVector,
    identity_weight,
    lp_mixture_weight,
    mixture_weight,
    pi0_weight,
    truncated_weight,
)
from .errors import InsufficientSampleError, InvalidDimensionError, ValidationError, ZeroWeightError

STATISTIC_FAMILIES = ("pearson", "zelterman", "collision", "u")


@dataclass(frozen=True)
class SampleList:
    """Bin index (1-based) of each one-hot observation."""

    bins: tuple
    d: int

    def __post_init__(self):
        bins = tuple(int(b) for b in self.bins)
        if int(self.d) != self.d or self.d < 1:
            raise InvalidDimensionError("d must be a positive integer")
        if not bins:
            raise InsufficientSampleError("a sample list needs at least one observation")
        if min(bins) < 1 or max(bins) > self.d:
            raise ValidationError(f"bin indices must lie in 1..{self.d}")
        object.__setattr__(self, "bins", bins)

    @property
    def n(self) -> int:
        return len(self.bins)

    def to_counts(self) -> CountVector:
        return CountVector(np.bincount(np.asarray(self.bins) - 1, minlength=self.d))

    @classmethod
    def from_counts(cls, counts: CountVector) -> "SampleList":
        bins = np.repeat(np.arange(1, counts.d + 1), counts.counts)
        return cls(tuple(bins.tolist()), counts.d)


@dataclass(frozen=True)
class StatisticValue:
    value: float
    kind: str
    n: int
    d: int

    def __post_init__(self):
        if self.kind == "collision" and (self.value < 0 or self.value != int(self.value)):
            raise ValidationError("collision statistic must be a non-negative integer")


def _check_dims(*vectors):
    ds = {v.d for v in vectors}
    if len(ds) != 1:
        raise InvalidDimensionError(f"dimension mismatch: {sorted(ds)}")


def _require_positive_pi0(pi0: ProbVector):
    if np.any(pi0.values == 0):
        raise ZeroWeightError("pi0 has a zero entry; the chi-square scaling 1/pi0 is undefined")


def _fsum(x) -> float:
    return math.fsum(np.asarray(x, dtype=np.float64).ravel())


# -- statistic specifications ------------------------------------------------

@dataclass(frozen=True)
class Statistic:
    """A statistic family together with its weight (for ``u`` only)."""

    name: str
    family: str
    weight: WeightVector | None = None


def resolve_statistic(name: str, pi0: ProbVector) -> Statistic:
    """Map a statistic name to a :class:`Statistic` bound to ``pi0``.

    Names: ``pearson``, ``zelterman``, ``collision``, ``u_pi0``,
    ``u_identity``, ``u_mix`` (or ``u_mix:<gamma>``), ``u_trunc``,
    ``u_lp:<p>``.
    """
    base, _, arg = name.partition(":")
    if base in ("pearson", "zelterman", "collision"):
        if arg:
            raise ValidationError(f"statistic {base!r} takes no parameter")
        if base != "collision":
            _require_positive_pi0(pi0)
        return Statistic(name, base)
    try:
        param = float(arg) if arg else None
    except ValueError:
        raise ValidationError(f"bad parameter in statistic {name!r}") from None
    if base == "u_pi0" and param is None:
        w = pi0_weight(pi0)
    elif base == "u_identity" and param is None:
        w = identity_weight(pi0.d)
    elif base == "u_mix":
        w = mixture_weight(pi0, 0.5 if param is None else param)
    elif base == "u_trunc" and param is None:
        w = truncated_weight(pi0)
    elif base == "u_lp" and param is not None:
        w = lp_mixture_weight(pi0, param)
    else:
        raise ValidationError(f"unknown statistic {name!r}")
    return Statistic(name, "u", w)


def weight_statistic(w: WeightVector) -> Statistic:
    return Statistic(f"u[{w.provenance}]", "u", w)


def batch_statistics(counts: np.ndarray, pi0: ProbVector,
                     statistics: Sequence[Statistic]) -> dict[str, np.ndarray]:
    """Evaluate several statistics on every row of a ``(reps, d)`` count matrix.

    All rows must share the same ``n``.
    """
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    if counts.ndim != 2 or counts.shape[1] != pi0.d:
        raise InvalidDimensionError("count matrix must have shape (reps, d)")
    ns = counts.sum(axis=1)
    if ns.size and np.any(ns != ns[0]):
        raise ValidationError("all replicates must share the same sample size")
    n = int(ns[0]) if ns.size else 0

    rows = []
    index = {}

    def need(key, vec):
        if key not in index:
            index[key] = len(rows)
            rows.append(np.asarray(vec, dtype=np.float64))
        return index[key]

    plan = []
    for st in statistics:
        if st.family == "u":
            if st.weight.d != pi0.d:
                raise InvalidDimensionError("weight and pi0 dimensions differ")
            if n < 2:
                raise InsufficientSampleError("U-statistics need n >= 2")
            a = st.weight.a
            ka = need(("a", st.weight.provenance, st.weight.w.tobytes()), a)
            kb = need(("ap", st.weight.provenance, st.weight.w.tobytes()), a * pi0.values)
            plan.append((st, ka, kb, _fsum(a * pi0.values ** 2)))
        elif st.family in ("pearson", "zelterman"):
            _require_positive_pi0(pi0)
            plan.append((st, need(("inv_pi0",), 1.0 / pi0.values), None, None))
        elif st.family == "collision":
            plan.append((st, need(("ones",), np.ones(pi0.d)), None, None))
        else:
            raise ValidationError(f"unknown statistic family {st.family!r}")

    if rows:
        q, l = kernels.count_sums(counts, np.ascontiguousarray(np.vstack(rows)))
    out = {}
    for st, ka, kb, const in plan:
        if st.family == "u":
            out[st.name] = q[:, ka] / (n * (n - 1.0)) - 2.0 * l[:, kb] / n + const
        elif st.family == "collision":
            out[st.name] = q[:, ka] / 2.0
        else:
            chi2 = (q[:, ka] + l[:, ka]) / n - n
            out[st.name] = chi2 if st.family == "pearson" else chi2 - l[:, ka] / n
    return out


def _single(counts: CountVector, pi0: ProbVector, st: Statistic) -> float:
    _check_dims(counts, pi0)
    return float(batch_statistics(counts.counts[None, :], pi0, [st])[st.name][0])


# -- statistics --------------------------------------------------------------

def pearson_chi2(counts: CountVector, pi0: ProbVector) -> float:
    """Pearson's chi-square, ``sum_j (Y_j - n pi0_j)^2 / (n pi0_j)``."""
    _require_positive_pi0(pi0)
    return _single(counts, pi0, Statistic("pearson", "pearson"))


def zelterman_phi(counts: CountVector, pi0: ProbVector) -> float:
    """Pearson's chi-square minus ``sum_j Y_j / (n pi0_j)``."""
    _require_positive_pi0(pi0)
    return _single(counts, pi0, Statistic("zelterman", "zelterman"))


def collision_statistic(counts: CountVector) -> int:
    """Number of pairs of observations sharing a bin."""
    c = counts.counts
    return int(np.sum(c * (c - 1)) // 2)


def u_statistic(counts: CountVector, pi0: ProbVector, w: WeightVector) -> float:
    """U-statistic with kernel ``(X_i - pi0)^T diag(1/w) (X_j - pi0)``."""
    _check_dims(counts, pi0, w)
    if counts.n < 2:
        raise InsufficientSampleError("U-statistics need n >= 2")
    return _single(counts, pi0, weight_statistic(w))


def kernel_matrix(pi0: ProbVector, w: WeightVector) -> np.ndarray:
    """``H[j, k] = (e_j - pi0)^T diag(1/w) (e_k - pi0)`` for all bin pairs."""
    centered = np.eye(pi0.d) - pi0.values[None, :]
    return (centered * w.a) @ centered.T


def kernel_value(j: int, k: int, pi0: ProbVector, w: WeightVector) -> float:
    """``h_A(e_j, e_k)`` for 0-based bins, built from the one-hot vectors."""
    xj = -pi0.values.copy()
    xj[j] += 1.0
    xk = -pi0.values.copy()
    xk[k] += 1.0
    return float(np.dot(xj * w.a, xk))


def u_statistic_pairwise(samples: SampleList, pi0: ProbVector, w: WeightVector) -> float:
    """Literal O(n^2) average of the kernel over pairs ``i < j``."""
    if samples.d != pi0.d or w.d != pi0.d:
        raise InvalidDimensionError("dimension mismatch")
    n = samples.n
    if n < 2:
        raise InsufficientSampleError("U-statistics need n >= 2")
    h = kernel_matrix(pi0, w).tolist()
    b = [x - 1 for x in samples.bins]
    terms = [h[b[i]][b[j]] for i in range(n) for j in range(i + 1, n)]
    return math.fsum(terms) / math.comb(n, 2)


def v_statistic_pairwise(samples: SampleList, pi0: ProbVector, w: WeightVector) -> float:
    """Literal O(n^2) average of the kernel over all ordered pairs, diagonal included."""
    if samples.d != pi0.d or w.d != pi0.d:
        raise InvalidDimensionError("dimension mismatch")
    n = samples.n
    h = kernel_matrix(pi0, w).tolist()
    b = [x - 1 for x in samples.bins]
    terms = [h[b[i]][b[j]] for i in range(n) for j in range(n)]
    return math.fsum(terms) / n ** 2


# -- moments -----------------------------------------------------------------

def trace_weighted_sq(pi: ProbVector, a) -> float:
    """``tr{(A Sigma)^2}`` for ``A = diag(a)`` and ``Sigma = diag(pi) - pi pi^T``.

    ``a`` may contain any real values.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (pi.d,):
        raise InvalidDimensionError("a must have length d")
    p = pi.values
    ap2 = a * p * p
    return _fsum(a * ap2) - 2.0 * _fsum(a * ap2 * p) + _fsum(ap2) ** 2


def signal_quadform(pi: ProbVector, pi0: ProbVector, w: WeightVector) -> float:
    """``(pi - pi0)^T A Sigma A (pi - pi0)`` with ``Sigma`` taken under ``pi``."""
    _check_dims(pi, pi0, w)
    ad = (pi.values - pi0.values) * w.a
    return _fsum(ad * ad * pi.values) - _fsum(ad * pi.values) ** 2


def expectation_u(pi: ProbVector, pi0: ProbVector, w: WeightVector) -> float:
    """``||A^{1/2} (pi - pi0)||^2``, the mean of the U-statistic under ``pi``."""
    _check_dims(pi, pi0, w)
    delta = pi.values - pi0.values
    return _fsum(delta * delta * w.a)


def variance_u(pi: ProbVector, pi0: ProbVector, w: WeightVector, n: int) -> float:
    """Exact finite-sample variance of the U-statistic under ``pi``."""
    _check_dims(pi, pi0, w)
    if int(n) != n or n < 2:
        raise InsufficientSampleError("U-statistics need n >= 2")
    n = int(n)
    return (trace_weighted_sq(pi, w.a) + 2.0 * (n - 1) * signal_quadform(pi, pi0, w)) / math.comb(n, 2)
