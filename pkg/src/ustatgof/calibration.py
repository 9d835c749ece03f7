"""Critical values, p-values and power approximations for the U-statistic tests.

Four calibrations are offered:

* ``poisson`` -- the collision count referenced against a Poisson law, for
  the sparse regime where n is of order sqrt(d);
* ``gaussian`` -- the studentized U-statistic against N(0, 1), for n >> sqrt(d);
* ``chebyshev`` -- the distribution-free minimax test, size at most alpha;
* ``monte_carlo`` -- null quantiles simulated under pi0.

Normal and Poisson tails come from ``scipy.special``: ``ndtr``/``ndtri``
(Cephes; erf/erfc rational approximations, double precision) and the
regularized lower incomplete gamma ``gammainc``, using
``P(Pois(lam) > c) = P(c + 1, lam)``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special
from scipy.stats import poisson

from . import kernels
from .distributions import CountVector, ProbVector, WeightVector
from .errors import (
    CapabilityError,
    DomainError,
    InsufficientReplicatesError,
    InsufficientSampleError,
    InvalidDimensionError,
    ZeroVarianceError,
)
from .montecarlo import simulate_statistics, upper_quantile
from .statistics import (
    batch_statistics,
    collision_statistic,
    expectation_u,
    resolve_statistic,
    signal_quadform,
    trace_weighted_sq,
    u_statistic,
)

CALIBRATIONS = ("poisson", "gaussian", "chebyshev", "monte_carlo")
DENSE_TRACE_CAP = 2000


@dataclass(frozen=True)
class TestResult:
    statistic: float
    calibration: str
    critical_value: float
    p_value: float | None
    reject: bool
    alpha: float
    n: int
    d: int
    weight_provenance: str | None = None
    statistic_kind: str | None = None

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.calibration not in CALIBRATIONS:
            raise ValueError(f"unknown calibration {self.calibration!r}")
        if self.reject != (self.statistic > self.critical_value):
            raise ValueError("reject flag must equal statistic > critical_value")

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["p_value"] is None:
            del out["p_value"]
        return out


@dataclass(frozen=True)
class RegimeThresholds:
    """Finite-sample cutoffs for :func:`regime_diagnostics`; heuristic."""

    p1_max: float = 0.1
    eta0_max: float = 10.0
    snr_cut: float = 1.0


@dataclass
class RegimeDiagnostics:
    p1: float
    p2: tuple[float, float, float]
    p3: float
    thm2_trace_ratio: float | None
    thm2_moment_ratio: float
    snr: float
    remark2_gap: float
    suggested_regime: str
    kernel_fourth_moment: float
    kernel_cross_moment: float
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["p2"] = {"eta1": self.p2[0], "eta0": self.p2[1], "eta2": self.p2[2]}
        return out


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def _check_n(n):
    if int(n) != n or n < 2:
        raise InsufficientSampleError(f"need n >= 2, got {n!r}")


def _same_d(*vs):
    if len({v.d for v in vs}) != 1:
        raise InvalidDimensionError("dimension mismatch")


# -- special functions -------------------------------------------------------

def normal_cdf(x: float) -> float:
    return float(special.ndtr(x))


def normal_upper_quantile(alpha: float) -> float:
    """``z`` with ``P(N(0,1) > z) = alpha``."""
    _check_alpha(alpha)
    return float(-special.ndtri(alpha))


def poisson_sf(c: int, lam: float) -> float:
    """``P(Pois(lam) > c)``."""
    if c < 0:
        return 1.0
    if lam <= 0:
        return 0.0
    return float(special.gammainc(c + 1, lam))


# -- Poisson regime ----------------------------------------------------------

def poisson_reference(pi: ProbVector, pi0: ProbVector, n: int) -> tuple[float, float, float]:
    """``C(n,2)`` times ``pi.pi``, ``pi0.pi0`` and ``pi.pi0``."""
    _check_n(n)
    _same_d(pi, pi0)
    b = math.comb(int(n), 2)
    p, q = pi.values, pi0.values
    return (b * math.fsum(p * p), b * math.fsum(q * q), b * math.fsum(p * q))


def poisson_critical_value(eta0: float, alpha: float) -> int:
    """Smallest integer ``c >= 0`` with ``P(Pois(eta0) > c) <= alpha``."""
    _check_alpha(alpha)
    if not eta0 > 0:
        raise DomainError(f"eta0 must be positive, got {eta0!r}")
    c = max(int(poisson.isf(alpha, eta0)), 0)
    while c > 0 and poisson_sf(c - 1, eta0) <= alpha:
        c -= 1
    while poisson_sf(c, eta0) > alpha:
        c += 1
    return c


def poisson_test(counts: CountVector, pi0: ProbVector, alpha: float = 0.05) -> TestResult:
    """Collision count ``W`` against ``Pois(C(n,2) pi0.pi0)``."""
    _check_alpha(alpha)
    _same_d(counts, pi0)
    _check_n(counts.n)
    eta0 = math.comb(counts.n, 2) * math.fsum(pi0.values ** 2)
    w = collision_statistic(counts)
    c = poisson_critical_value(eta0, alpha)
    return TestResult(statistic=float(w), calibration="poisson", critical_value=float(c),
                      p_value=poisson_sf(w - 1, eta0), reject=bool(w > c), alpha=alpha,
                      n=counts.n, d=counts.d, weight_provenance="identity", statistic_kind="collision")


def poisson_power(eta1: float, c_alpha: int) -> float:
    """``P(Pois(eta1) > c_alpha)``."""
    if not eta1 > 0:
        raise DomainError(f"eta1 must be positive, got {eta1!r}")
    return poisson_sf(int(c_alpha), eta1)


def tv_bound(pi: ProbVector, n: int) -> float:
    """Stein-Chen bound on the distance between ``W`` and a Poisson law of equal mean.

    The bound is stated for ``2 sup_A |P(W in A) - P(Z in A)|``, so it also
    bounds the half-L1 total variation distance.
    """
    _check_n(n)
    p = pi.values
    s2 = math.fsum(p * p)
    eta = math.comb(int(n), 2) * s2
    if eta <= 0:
        raise DomainError("collision mean is zero")
    return 2.0 * n ** 3 * (-math.expm1(-eta) / eta) * (math.fsum(p ** 3) + s2 ** 2)


# -- Gaussian regime ---------------------------------------------------------

def null_trace(pi0: ProbVector, w: WeightVector) -> float:
    return trace_weighted_sq(pi0, w.a)


def gaussian_test(counts: CountVector, pi0: ProbVector, w: WeightVector, alpha: float = 0.05) -> TestResult:
    """Studentized U-statistic ``sqrt(C(n,2)) U_A / sqrt(tr{(A Sigma0)^2})`` vs ``N(0,1)``."""
    _check_alpha(alpha)
    _same_d(counts, pi0, w)
    _check_n(counts.n)
    lam0 = null_trace(pi0, w)
    if not lam0 > 0:
        raise ZeroVarianceError("null covariance is degenerate; the studentized statistic is undefined")
    z = math.sqrt(math.comb(counts.n, 2)) * u_statistic(counts, pi0, w) / math.sqrt(lam0)
    crit = normal_upper_quantile(alpha)
    return TestResult(statistic=z, calibration="gaussian", critical_value=crit,
                      p_value=float(special.ndtr(-z)), reject=bool(z > crit), alpha=alpha,
                      n=counts.n, d=counts.d, weight_provenance=w.provenance, statistic_kind="u")


def gaussian_power(pi0: ProbVector, pi: ProbVector, w: WeightVector, n: int, alpha: float = 0.05,
                   form: str = "full") -> float:
    """Normal approximation to the power of :func:`gaussian_test` against ``pi``.

    ``form`` is ``full``, ``strong_signal`` (linear part dominates) or
    ``weak_signal`` (quadratic part dominates).
    """
    _check_alpha(alpha)
    _check_n(n)
    _same_d(pi0, pi, w)
    n = int(n)
    z = normal_upper_quantile(alpha)
    mean = expectation_u(pi, pi0, w)
    quad = signal_quadform(pi, pi0, w)
    if form == "strong_signal":
        if not quad > 0:
            raise DomainError("strong-signal form needs a non-zero signal term")
        return normal_cdf(math.sqrt(n) * mean / math.sqrt(4.0 * quad))
    lam0 = null_trace(pi0, w)
    lam1 = trace_weighted_sq(pi, w.a)
    if form == "full":
        total = lam1 + 2.0 * (n - 1) * quad
        if not total > 0:
            raise ZeroVarianceError("variance of the statistic is zero under pi")
        return normal_cdf(-math.sqrt(lam0 / total) * z + math.sqrt(math.comb(n, 2)) * mean / math.sqrt(total))
    if form == "weak_signal":
        if not lam1 > 0:
            raise ZeroVarianceError("quadratic variance term is zero under pi")
        return normal_cdf(-math.sqrt(lam0 / lam1) * z + n * mean / math.sqrt(2.0 * lam1))
    raise DomainError(f"unknown power form {form!r}")


# -- Chebyshev / minimax -----------------------------------------------------

def minimax_critical_value(pi0: ProbVector, w: WeightVector, n: int, alpha: float) -> float:
    """``sqrt(Var0(U_w) / alpha)``."""
    _check_alpha(alpha)
    _check_n(n)
    return math.sqrt(null_trace(pi0, w) / (alpha * math.comb(int(n), 2)))


def minimax_test(counts: CountVector, pi0: ProbVector, w: WeightVector, alpha: float = 0.05) -> TestResult:
    """Reject when ``U_w`` exceeds the Chebyshev bound on its null upper tail."""
    _check_alpha(alpha)
    _same_d(counts, pi0, w)
    _check_n(counts.n)
    u = u_statistic(counts, pi0, w)
    t = minimax_critical_value(pi0, w, counts.n, alpha)
    return TestResult(statistic=u, calibration="chebyshev", critical_value=t, p_value=None,
                      reject=bool(u > t), alpha=alpha, n=counts.n, d=counts.d,
                      weight_provenance=w.provenance, statistic_kind="u")


def separation_planner(d: int, n: int, alpha: float = 0.05, zeta: float = 0.05,
                       C: float = 1.0) -> tuple[float, float]:
    """Squared L1 separation sufficient for type II error ``<= zeta``, and ``d**0.25 / sqrt(n)``."""
    for name, v in (("d", d), ("n", n), ("alpha", alpha), ("zeta", zeta), ("C", C)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v!r}")
    if not zeta <= 1:
        raise DomainError(f"zeta must lie in (0, 1], got {zeta!r}")
    _check_alpha(alpha)
    eps_sq = C * math.sqrt(d) / n * (1.0 / math.sqrt(alpha) + 1.0 / zeta)
    return eps_sq, d ** 0.25 / math.sqrt(n)


# -- diagnostics -------------------------------------------------------------

def dense_trace_fourth(pi: ProbVector, a) -> float:
    """``tr{(A Sigma)^4}`` by dense matrix products."""
    p = pi.values
    a = np.asarray(a, dtype=np.float64)
    m = a[:, None] * (np.diag(p) - np.outer(p, p))
    m2 = m @ m
    return float(np.sum(m2 * m2.T))


def regime_diagnostics(pi: ProbVector, pi0: ProbVector, w: WeightVector, n: int, sigma: float = 1.0,
                       thresholds: RegimeThresholds = RegimeThresholds(),
                       strict: bool = True) -> RegimeDiagnostics:
    """Finite-n versions of the quantities governing the Poisson and Gaussian limits.

    Raises :class:`CapabilityError` (with the populated report in ``partial``)
    when ``d`` exceeds :data:`DENSE_TRACE_CAP`, unless ``strict`` is false, in
    which case the trace ratio is ``None`` and a warning is attached.
    """
    _check_n(n)
    _same_d(pi, pi0, w)
    n = int(n)
    p, q = pi.values, pi0.values
    s2 = math.fsum(p * p)
    p1 = n ** 3 * (math.fsum(p ** 3) + s2 ** 2)
    pq = math.fsum(p * q)
    p3 = n ** 3 * (math.fsum(p * q * q) - pq ** 2)
    eta = poisson_reference(pi, pi0, n)
    lam1 = trace_weighted_sq(pi, w.a)
    quad = signal_quadform(pi, pi0, w)
    e4, e22 = kernels.kernel_moments(np.ascontiguousarray(p), np.ascontiguousarray(q),
                                     np.ascontiguousarray(w.a))
    if lam1 > 0:
        moment_ratio = (e4 + n * e22) / (n ** 2 * lam1 ** 2)
        snr = n * quad / lam1
    else:
        moment_ratio = math.inf
        snr = math.inf if quad > 0 else 0.0
    gap = n ** 2 * trace_weighted_sq(pi, w.a - sigma)

    null = bool(np.array_equal(p, q))
    if p1 <= thresholds.p1_max and eta[1] <= thresholds.eta0_max:
        regime = "poisson"
    elif null:
        regime = "gaussian_null"
    elif snr >= thresholds.snr_cut:
        regime = "gaussian_strong_signal"
    else:
        regime = "gaussian_weak_signal"

    report = RegimeDiagnostics(p1=p1, p2=eta, p3=p3, thm2_trace_ratio=None,
                               thm2_moment_ratio=moment_ratio, snr=max(snr, 0.0), remark2_gap=max(gap, 0.0),
                               suggested_regime=regime, kernel_fourth_moment=e4, kernel_cross_moment=e22)
    if pi.d > DENSE_TRACE_CAP:
        msg = f"d={pi.d} exceeds the dense trace cap {DENSE_TRACE_CAP}; trace ratio not computed"
        report.warnings.append({"code": CapabilityError.code, "message": msg})
        if strict:
            raise CapabilityError(msg, partial=report)
        return report
    report.thm2_trace_ratio = dense_trace_fourth(pi, w.a) / lam1 ** 2 if lam1 > 0 else math.inf
    return report


# -- Monte Carlo calibration -------------------------------------------------

def empirical_quantile_calibrated_test(counts: CountVector, pi0: ProbVector, statistic_kind: str = "u_mix",
                                       alpha: float = 0.05, reps: int = 1000, seed: int = 0,
                                       workers: int = 1) -> TestResult:
    """Calibrate any statistic by ``reps`` null replicates drawn under ``pi0``."""
    _check_alpha(alpha)
    _same_d(counts, pi0)
    if int(reps) != reps or reps < 100:
        raise InsufficientReplicatesError(f"need reps >= 100, got {reps!r}")
    st = resolve_statistic(statistic_kind, pi0)
    if st.family == "u":
        _check_n(counts.n)
    observed = float(batch_statistics(counts.counts[None, :], pi0, [st])[st.name][0])
    null = simulate_statistics(pi0, pi0, counts.n, [st], int(reps), seed, 0, workers)[st.name]
    crit = upper_quantile(null, alpha)
    p = (1 + int(np.sum(null >= observed))) / (reps + 1)
    return TestResult(statistic=observed, calibration="monte_carlo", critical_value=crit, p_value=p,
                      reject=bool(observed > crit), alpha=alpha, n=counts.n, d=counts.d,
                      weight_provenance=st.weight.provenance if st.weight is not None else None,
                      statistic_kind=statistic_kind)
