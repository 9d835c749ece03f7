"""Seeded replicate engine shared by the calibrated tests and the studies.

Replicate ``i`` of scenario ``s`` under master seed ``seed`` always draws from
``replicate_stream(seed, s, i)``; blocks may run on any number of threads and
the output array is filled by replicate index, so results never depend on the
schedule.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .distributions import ProbVector, sample_count_matrix
from .statistics import Statistic, batch_statistics

BLOCK = 250


def simulate_statistics(pi: ProbVector, pi0: ProbVector, n: int, statistics: Sequence[Statistic],
                        reps: int, seed: int, scenario: int = 0, workers: int = 1) -> dict[str, np.ndarray]:
    """Draw ``reps`` samples of size ``n`` from ``pi`` and evaluate each statistic against ``pi0``."""
    out = {st.name: np.empty(reps) for st in statistics}
    blocks = [(lo, min(lo + BLOCK, reps)) for lo in range(0, reps, BLOCK)]

    def run(block):
        lo, hi = block
        counts = sample_count_matrix(pi, n, seed, scenario, lo, hi)
        vals = batch_statistics(counts, pi0, statistics)
        for name, v in vals.items():
            out[name][lo:hi] = v

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, blocks))
    else:
        for b in blocks:
            run(b)
    return out


def upper_quantile(null_stats: np.ndarray, alpha: float) -> float:
    """Order statistic of rank ``ceil((1 - alpha) * reps)`` (1-based) of the null sample."""
    reps = len(null_stats)
    rank = int(np.ceil(round((1.0 - alpha) * reps, 9)))
    rank = min(max(rank, 1), reps)
    return float(np.sort(null_stats)[rank - 1])
