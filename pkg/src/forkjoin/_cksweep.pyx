# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled power-iteration sweeps for the truncated two-queue chain."""
import numpy as np
from libc.math cimport fabs


def iterate(double[:, ::1] P, double lam, double mu_a, double mu_b, double tol, long max_iter):
    """Sweep until ``unif * max|P_new - P| < tol``; returns ``(P, sweeps, change)``."""
    cdef Py_ssize_t n = P.shape[0], i, j
    cdef double unif = lam + mu_a + mu_b
    cdef double a = lam / unif, b = mu_a / unif, c = mu_b / unif
    cdef double out, v, s, change = 0.0, d
    cdef long it
    cur_np = np.array(P, copy=True)
    new_np = np.empty_like(cur_np)
    cdef double[:, ::1] cur = cur_np
    cdef double[:, ::1] new = new_np
    cdef double[:, ::1] tmp
    for it in range(1, max_iter + 1):
        s = 0.0
        for i in range(n):
            for j in range(n):
                out = 0.0
                if i < n - 1 and j < n - 1:
                    out += lam
                if i > 0:
                    out += mu_a
                if j > 0:
                    out += mu_b
                v = (1.0 - out / unif) * cur[i, j]
                if i > 0 and j > 0:
                    v += a * cur[i - 1, j - 1]
                if i < n - 1:
                    v += b * cur[i + 1, j]
                if j < n - 1:
                    v += c * cur[i, j + 1]
                new[i, j] = v
                s += v
        change = 0.0
        for i in range(n):
            for j in range(n):
                new[i, j] /= s
                d = fabs(new[i, j] - cur[i, j])
                if d > change:
                    change = d
        tmp = cur
        cur = new
        new = tmp
        if unif * change < tol:
            return np.asarray(cur), it, change
    return np.asarray(cur), -1, change
