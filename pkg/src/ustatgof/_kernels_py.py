"""NumPy implementations of the hot loops (always available)."""
import numpy as np

_BLOCK = 256


def count_sums(counts, coefs):
    """Per row r and coefficient row k: sum_j c_kj Y_j (Y_j - 1) and sum_j c_kj Y_j."""
    counts = np.asarray(counts, dtype=np.int64)
    coefs = np.asarray(coefs, dtype=np.float64)
    if counts.ndim != 2 or coefs.ndim != 2 or counts.shape[1] != coefs.shape[1]:
        raise ValueError("counts and coefficient dimensions differ")
    y = counts.astype(np.float64)
    yy = y * (y - 1.0)
    q = np.empty((y.shape[0], coefs.shape[0]))
    l = np.empty_like(q)
    for k, c in enumerate(coefs):
        # np.sum along a contiguous axis uses pairwise summation
        q[:, k] = (yy * c).sum(axis=1)
        l[:, k] = (y * c).sum(axis=1)
    return q, l


def kernel_moments(pi, pi0, a):
    """E[h^4] and E[h(X1,X2)^2 h(X1,X3)^2] for i.i.d. draws from ``pi``."""
    pi = np.asarray(pi, dtype=np.float64)
    pi0 = np.asarray(pi0, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if not (pi.shape == pi0.shape == a.shape):
        raise ValueError("dimensions differ")
    c = a * pi0
    s = float(np.sum(c * pi0))
    d = pi.size
    e4 = 0.0
    e22 = 0.0
    for lo in range(0, d, _BLOCK):
        hi = min(lo + _BLOCK, d)
        h = s - c[lo:hi, None] - c[None, :]
        h[np.arange(hi - lo), np.arange(lo, hi)] += a[lo:hi]
        h2 = h * h
        inner = h2 @ pi
        row4 = (h2 * h2) @ pi
        e4 += float(pi[lo:hi] @ row4)
        e22 += float(pi[lo:hi] @ (inner * inner))
    return e4, e22
