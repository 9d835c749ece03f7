# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; ``_kernels_py`` holds the reference NumPy versions."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def count_sums(const cnp.int64_t[:, ::1] counts, const double[:, ::1] coefs):
    """Per row r and coefficient row k: sum_j c_kj Y_j (Y_j - 1) and sum_j c_kj Y_j.

    Only bins with a non-zero count are visited; sums are Neumaier-compensated.
    """
    cdef Py_ssize_t R = counts.shape[0], d = counts.shape[1], K = coefs.shape[0]
    if coefs.shape[1] != d:
        raise ValueError("counts and coefficient dimensions differ")
    cdef double[:, ::1] ct = np.ascontiguousarray(np.asarray(coefs).T)
    q_arr = np.zeros((R, K), dtype=np.float64)
    l_arr = np.zeros((R, K), dtype=np.float64)
    cdef double[:, ::1] q = q_arr
    cdef double[:, ::1] l = l_arr
    cdef double[::1] qc = np.zeros(K, dtype=np.float64)
    cdef double[::1] lc = np.zeros(K, dtype=np.float64)
    cdef Py_ssize_t r, j, k
    cdef cnp.int64_t y
    cdef double yy, y1, term, s, t
    with nogil:
        for r in range(R):
            for k in range(K):
                qc[k] = 0.0
                lc[k] = 0.0
            for j in range(d):
                y = counts[r, j]
                if y == 0:
                    continue
                y1 = <double>y
                yy = y1 * (y1 - 1.0)
                for k in range(K):
                    if yy != 0.0:
                        term = ct[j, k] * yy
                        s = q[r, k]
                        t = s + term
                        if (s if s >= 0 else -s) >= (term if term >= 0 else -term):
                            qc[k] += (s - t) + term
                        else:
                            qc[k] += (term - t) + s
                        q[r, k] = t
                    term = ct[j, k] * y1
                    s = l[r, k]
                    t = s + term
                    if (s if s >= 0 else -s) >= (term if term >= 0 else -term):
                        lc[k] += (s - t) + term
                    else:
                        lc[k] += (term - t) + s
                    l[r, k] = t
            for k in range(K):
                q[r, k] += qc[k]
                l[r, k] += lc[k]
    return q_arr, l_arr


def kernel_moments(const double[::1] pi, const double[::1] pi0, const double[::1] a):
    """E[h^4] and E[h(X1,X2)^2 h(X1,X3)^2] for i.i.d. draws from ``pi``.

    h(j, k) = a_j [j == k] - a_j pi0_j - a_k pi0_k + sum_l a_l pi0_l^2.
    O(d^2) time, O(d) memory.
    """
    cdef Py_ssize_t d = pi.shape[0], j, k
    if pi0.shape[0] != d or a.shape[0] != d:
        raise ValueError("dimensions differ")
    cdef double[::1] c = np.empty(d, dtype=np.float64)
    cdef double s = 0.0
    for j in range(d):
        c[j] = a[j] * pi0[j]
        s += c[j] * pi0[j]
    cdef double h, h2, inner, e4 = 0.0, e22 = 0.0, row4
    with nogil:
        for j in range(d):
            if pi[j] == 0.0:
                continue
            inner = 0.0
            row4 = 0.0
            for k in range(d):
                h = s - c[j] - c[k]
                if j == k:
                    h = h + a[j]
                h2 = h * h
                inner = inner + pi[k] * h2
                row4 = row4 + pi[k] * h2 * h2
            e4 = e4 + pi[j] * row4
            e22 = e22 + pi[j] * inner * inner
    return e4, e22
