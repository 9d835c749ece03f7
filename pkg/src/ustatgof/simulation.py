"""Monte Carlo power studies and distributional fidelity checks.

Scenario ``0`` of a study is the null used to estimate critical values;
alternative ``k`` (1-based) is scenario ``k``. Studies that run several
designs shift scenario ids by ``scenario_offset`` so no two designs share a
stream.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy import stats as sps

from .calibration import (
    CALIBRATIONS,
    gaussian_power,
    minimax_critical_value,
    normal_upper_quantile,
    null_trace,
    poisson_critical_value,
    poisson_reference,
)
from .distributions import ProbVector, power_law
from .errors import InsufficientReplicatesError, ValidationError
from .montecarlo import simulate_statistics, upper_quantile
from .statistics import resolve_statistic, trace_weighted_sq

DistSpec = Union[float, ProbVector]

FIGURE2_STATISTICS = ("pearson", "u_pi0", "u_identity", "u_mix", "u_trunc")
FIGURE3_STATISTICS = ("u_pi0", "u_identity", "u_mix")
CSV_FIELDS = ("scenario", "statistic", "d", "n", "r", "alpha", "null_quantile", "power", "se", "seed")


def default_alt_grid(r0: float) -> list[float]:
    """``r0 +/- k/4`` for ``k = 1..8``, dropping negative exponents."""
    steps = [0.25 * k for k in range(1, 9)]
    grid = sorted({r0 - s for s in steps if r0 - s >= 0} | {r0 + s for s in steps})
    return grid


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


@dataclass
class PowerStudyConfig:
    """One null, several alternatives, and the statistics to compare.

    ``null`` and each entry of ``alternatives`` are either a power-law
    exponent (bin ``i`` gets mass proportional to ``i**r``) or an explicit
    :class:`ProbVector`.
    """

    null: DistSpec
    alternatives: Sequence[DistSpec]
    n: int
    d: int
    reps: int = 1000
    alpha: float = 0.05
    statistic_kinds: Sequence[str] = FIGURE2_STATISTICS
    calibration: str = "monte_carlo"
    seed: int = 0
    workers: int = 1
    scenario_offset: int = 0
    label: str = "study"

    def validate(self):
        errors = []
        if int(self.n) != self.n or self.n < 2:
            errors.append(f"n must be an integer >= 2 (got {self.n!r})")
        if int(self.d) != self.d or self.d < 1:
            errors.append(f"d must be a positive integer (got {self.d!r})")
        if int(self.reps) != self.reps or self.reps < 100:
            errors.append(f"reps must be an integer >= 100 (got {self.reps!r})")
        if not 0 < self.alpha < 1:
            errors.append(f"alpha must lie in (0, 1) (got {self.alpha!r})")
        if self.calibration not in CALIBRATIONS:
            errors.append(f"calibration must be one of {CALIBRATIONS} (got {self.calibration!r})")
        if not self.statistic_kinds:
            errors.append("statistic_kinds must not be empty")
        if self.calibration == "poisson" and any(s != "collision" for s in self.statistic_kinds):
            errors.append("poisson calibration applies to the collision statistic only")
        if self.calibration in ("gaussian", "chebyshev") and any(
                not s.startswith("u_") for s in self.statistic_kinds):
            errors.append(f"{self.calibration} calibration applies to U-statistics only")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            errors.append(f"seed must be a 64-bit non-negative integer (got {self.seed!r})")
        for spec in [self.null, *self.alternatives]:
            if isinstance(spec, ProbVector):
                if spec.d != self.d:
                    errors.append(f"distribution has d={spec.d}, config has d={self.d}")
            elif not (isinstance(spec, (int, float)) and spec >= 0):
                errors.append(f"bad distribution spec {spec!r}")
        if errors:
            raise ValidationError("; ".join(errors))

    def resolve(self, spec: DistSpec) -> ProbVector:
        return spec if isinstance(spec, ProbVector) else power_law(self.d, float(spec))

    def echo(self) -> dict:
        def enc(spec):
            return {"explicit_d": spec.d} if isinstance(spec, ProbVector) else {"power_law_r": float(spec)}

        return {"label": self.label, "null": enc(self.null), "alternatives": [enc(a) for a in self.alternatives],
                "n": int(self.n), "d": int(self.d), "reps": int(self.reps), "alpha": self.alpha,
                "statistic_kinds": list(self.statistic_kinds), "calibration": self.calibration,
                "seed": int(self.seed), "scenario_offset": int(self.scenario_offset)}


@dataclass
class PowerCell:
    scenario: str
    statistic: str
    d: int
    n: int
    r: float | None
    alpha: float
    null_quantile: float
    power: float
    se: float
    seed: int
    reps: int
    theoretical: float | None = None


@dataclass
class PowerStudyReport:
    cells: list[PowerCell]
    configs: list[dict] = field(default_factory=list)

    def power(self, statistic: str, scenario: str | None = None, r: float | None = None,
              d: int | None = None) -> float:
        for c in self.cells:
            if (c.statistic == statistic and (scenario is None or c.scenario == scenario)
                    and (r is None or c.r == r) and (d is None or c.d == d)):
                return c.power
        raise KeyError((statistic, scenario, r, d))

    def extend(self, other: "PowerStudyReport") -> "PowerStudyReport":
        return PowerStudyReport(self.cells + other.cells, self.configs + other.configs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        extra = any(c.theoretical is not None for c in self.cells)
        writer.writerow(CSV_FIELDS + (("theoretical",) if extra else ()))
        for c in self.cells:
            row = [_fmt(getattr(c, f)) for f in CSV_FIELDS]
            if extra:
                row.append(_fmt(c.theoretical))
            writer.writerow(row)
        for cfg in self.configs:
            buf.write("# config " + json.dumps(cfg, sort_keys=True) + "\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"configs": self.configs, "cells": [asdict(c) for c in self.cells]}


def _critical_values(cfg: PowerStudyConfig, pi0: ProbVector, stats) -> tuple[dict, str]:
    """Critical value per statistic, on the statistic's own scale."""
    if cfg.calibration == "monte_carlo":
        null = simulate_statistics(pi0, pi0, cfg.n, stats, cfg.reps, cfg.seed,
                                   cfg.scenario_offset, cfg.workers)
        return {st.name: upper_quantile(null[st.name], cfg.alpha) for st in stats}, "simulated"
    out = {}
    b = math.comb(cfg.n, 2)
    for st in stats:
        if cfg.calibration == "poisson":
            out[st.name] = float(poisson_critical_value(poisson_reference(pi0, pi0, cfg.n)[1], cfg.alpha))
        elif cfg.calibration == "gaussian":
            out[st.name] = normal_upper_quantile(cfg.alpha) * math.sqrt(null_trace(pi0, st.weight) / b)
        else:
            out[st.name] = minimax_critical_value(pi0, st.weight, cfg.n, cfg.alpha)
    return out, "analytic"


def run_power_study(cfg: PowerStudyConfig) -> PowerStudyReport:
    """Estimate critical values under the null, then rejection rates under each alternative."""
    cfg.validate()
    pi0 = cfg.resolve(cfg.null)
    stats = [resolve_statistic(s, pi0) for s in cfg.statistic_kinds]
    crit, _ = _critical_values(cfg, pi0, stats)
    cells = []
    for k, spec in enumerate(cfg.alternatives, start=1):
        pi = cfg.resolve(spec)
        vals = simulate_statistics(pi, pi0, cfg.n, stats, cfg.reps, cfg.seed,
                                   cfg.scenario_offset + k, cfg.workers)
        r = None if isinstance(spec, ProbVector) else float(spec)
        for st in stats:
            p = float(np.mean(vals[st.name] > crit[st.name]))
            cells.append(PowerCell(scenario=f"{cfg.label}:alt{k}", statistic=st.name, d=int(cfg.d),
                                   n=int(cfg.n), r=r, alpha=cfg.alpha, null_quantile=crit[st.name],
                                   power=p, se=math.sqrt(p * (1 - p) / cfg.reps), seed=int(cfg.seed),
                                   reps=int(cfg.reps)))
    return PowerStudyReport(cells, [cfg.echo()])


def bias_demo(n: int = 800, d: int = 4000, reps: int = 1000, seed: int = 0, null_r: float = 1.0,
              alt_r: float = 5.0, alpha: float = 0.05, workers: int = 1) -> PowerStudyReport:
    """Pearson's chi-square against the U-statistic with chi-square weights, one alternative."""
    cfg = PowerStudyConfig(null=null_r, alternatives=[alt_r], n=n, d=d, reps=reps, alpha=alpha,
                           statistic_kinds=("pearson", "u_pi0"), seed=seed, workers=workers, label="bias")
    return run_power_study(cfg)


def power_comparison(n: int = 200, d: int = 2000, reps: int = 1000, seed: int = 0,
                     nulls: Sequence[float] = (1.0, 5.0), grids: dict | None = None,
                     alpha: float = 0.05, workers: int = 1) -> PowerStudyReport:
    """Five-statistic power curves over power-law alternatives, one panel per null exponent."""
    report = PowerStudyReport([])
    for j, r0 in enumerate(nulls):
        grid = (grids or {}).get(r0, default_alt_grid(r0))
        cfg = PowerStudyConfig(null=r0, alternatives=list(grid), n=n, d=d, reps=reps, alpha=alpha,
                               statistic_kinds=FIGURE2_STATISTICS, seed=seed, workers=workers,
                               scenario_offset=1000 * j, label=f"r0={r0:g}")
        report = report.extend(run_power_study(cfg))
    return report


def theory_vs_empirical(n: int = 400, d_grid: Sequence[int] = (100, 300, 500, 700, 1000, 1500),
                        r: float = 2.0, reps: int = 1000, alpha: float = 0.05, seed: int = 0,
                        null_r: float = 1.0, workers: int = 1) -> PowerStudyReport:
    """Simulated power next to the normal-approximation power, per dimension."""
    report = PowerStudyReport([])
    for j, d in enumerate(d_grid):
        cfg = PowerStudyConfig(null=null_r, alternatives=[r], n=n, d=int(d), reps=reps, alpha=alpha,
                               statistic_kinds=FIGURE3_STATISTICS, seed=seed, workers=workers,
                               scenario_offset=1000 * j, label=f"d={d}")
        part = run_power_study(cfg)
        pi0, pi = cfg.resolve(null_r), cfg.resolve(r)
        for cell in part.cells:
            w = resolve_statistic(cell.statistic, pi0).weight
            cell.theoretical = gaussian_power(pi0, pi, w, n, alpha, "full")
        report = report.extend(part)
    return report


@dataclass
class FidelityResult:
    distance: float
    target: str
    reference_params: dict


def fidelity_check(pi0: ProbVector, n: int, reps: int = 5000, target: str = "poisson", seed: int = 0,
                   workers: int = 1) -> FidelityResult:
    """Distance between the simulated null law of a statistic and its limiting law.

    ``poisson``: total variation (half L1) between the collision count and
    ``Pois(C(n,2) pi0.pi0)``, mass above the largest observed count folded
    into one tail cell. ``gaussian``: Kolmogorov-Smirnov distance between the
    studentized identity-weight U-statistic and N(0, 1).
    """
    if int(reps) != reps or reps < 1000:
        raise InsufficientReplicatesError(f"need reps >= 1000, got {reps!r}")
    if target == "poisson":
        st = resolve_statistic("collision", pi0)
        w = simulate_statistics(pi0, pi0, n, [st], int(reps), seed, 0, workers)[st.name]
        w = np.rint(w).astype(np.int64)
        eta0 = poisson_reference(pi0, pi0, n)[1]
        top = int(w.max())
        emp = np.bincount(w, minlength=top + 1) / reps
        ref = sps.poisson.pmf(np.arange(top + 1), eta0)
        tail = float(sps.poisson.sf(top, eta0))
        dist = 0.5 * (float(np.sum(np.abs(emp - ref))) + tail)
        return FidelityResult(dist, target, {"eta0": eta0})
    if target == "gaussian":
        st = resolve_statistic("u_identity", pi0)
        u = simulate_statistics(pi0, pi0, n, [st], int(reps), seed, 0, workers)[st.name]
        scale = math.sqrt(trace_weighted_sq(pi0, st.weight.a) / math.comb(int(n), 2))
        res = sps.kstest(u / scale, "norm")
        return FidelityResult(float(res.statistic), target, {"mean": 0.0, "sd": 1.0, "u_scale": scale})
    raise ValidationError(f"unknown fidelity target {target!r}")


# figure presets: scale -> keyword arguments
FIGURE_PRESETS = {
    1: {"paper": dict(n=800, d=4000, reps=1000), "desk": dict(n=400, d=2000, reps=500)},
    2: {"paper": dict(n=200, d=2000, reps=1000), "desk": dict(n=200, d=1000, reps=500)},
    3: {"paper": dict(n=400, d_grid=(100, 300, 500, 700, 1000, 1500), reps=1000),
        "desk": dict(n=400, d_grid=(100, 300, 500), reps=500)},
}


def run_figure(number: int, scale: str = "paper", seed: int = 0, workers: int = 1, **overrides) -> PowerStudyReport:
    if number not in FIGURE_PRESETS:
        raise ValidationError(f"figure must be 1, 2 or 3 (got {number!r})")
    if scale not in FIGURE_PRESETS[number]:
        raise ValidationError(f"scale must be 'paper' or 'desk' (got {scale!r})")
    kwargs = dict(FIGURE_PRESETS[number][scale])
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    fn = {1: bias_demo, 2: power_comparison, 3: theory_vs_empirical}[number]
    return fn(seed=seed, workers=workers, **kwargs)
