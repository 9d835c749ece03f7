import itertools
import math

import numpy as np
import pytest

from ustatgof.distributions import ProbVector, make_weight
from ustatgof.statistics import SampleList, kernel_value

WEIGHT_SPECS = [("identity", None), ("pi0_inverse", None), ("mixture", 0.3),
                ("truncated", None), ("lp", 3.0)]


def random_simplex(rng, d, sparse=False):
    v = rng.dirichlet(np.full(d, 0.5 if sparse else 1.0))
    v = np.maximum(v, 1e-6)
    return ProbVector.from_values(v)


def random_instance(rng, kind, param, n_max=50, d_max=20):
    d = int(rng.integers(2, d_max + 1))
    n = int(rng.integers(2, n_max + 1))
    pi0 = random_simplex(rng, d)
    w = make_weight(kind, pi0, param)
    bins = rng.integers(1, d + 1, size=n)
    return SampleList(tuple(bins.tolist()), d), pi0, w


def enumerate_moments(pi, pi0, w, n):
    """Mean and variance of the U-statistic by summing over all d**n samples."""
    d = pi.d
    h = np.array([[kernel_value(j, k, pi0, w) for k in range(d)] for j in range(d)])
    m1 = []
    m2 = []
    for seq in itertools.product(range(d), repeat=n):
        prob = math.prod(pi.values[s] for s in seq)
        u = math.fsum(h[seq[i], seq[j]] for i in range(n) for j in range(i + 1, n)) / math.comb(n, 2)
        m1.append(prob * u)
        m2.append(prob * u * u)
    mean = math.fsum(m1)
    return mean, math.fsum(m2) - mean ** 2


def dense_sigma(pi):
    p = pi.values
    return np.diag(p) - np.outer(p, p)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
