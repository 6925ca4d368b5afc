# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels.

Call contracts match ``varcausal._kernels_py``; ``varcausal._backend``
picks whichever imported.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"


def forward_recursion(const double[:, ::1] theta, double[:, ::1] values,
                      const double[:, ::1] drive, Py_ssize_t lag, Py_ssize_t start_row,
                      const cnp.int64_t[::1] override_step, const cnp.int64_t[::1] override_node,
                      const double[:, ::1] override_rows):
    """See ``varcausal._kernels_py.forward_recursion``."""
    cdef Py_ssize_t n_steps = values.shape[0]
    cdef Py_ssize_t dim = values.shape[1]
    cdef Py_ssize_t n_ov = override_step.shape[0]
    cdef Py_ssize_t t, j, q, m, base, k = 0
    cdef double acc
    cdef double[::1] fresh = np.empty(dim)

    for t in range(start_row, n_steps):
        for j in range(dim):
            acc = drive[t, j]
            for q in range(lag):
                base = q * dim
                for m in range(dim):
                    acc += theta[j, base + m] * values[t - 1 - q, m]
            fresh[j] = acc
        while k < n_ov and override_step[k] == t:
            j = override_node[k]
            acc = drive[t, j]
            for q in range(lag):
                base = q * dim
                for m in range(dim):
                    acc += override_rows[k, base + m] * values[t - 1 - q, m]
            fresh[j] = acc
            k += 1
        for j in range(dim):
            values[t, j] = fresh[j]


def lasso_cd(const double[::1, :] X, const double[::1] y, double penalty, double tol,
             int max_iter, double[::1] w):
    """See ``varcausal._kernels_py.lasso_cd``."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t i, j, it
    cdef double half = 0.5 * penalty
    cdef double old, rho, new, change, max_change, norm_j
    cdef double[::1] col_norms = np.empty(p)
    cdef double[::1] resid = np.empty(n)

    for j in range(p):
        norm_j = 0.0
        for i in range(n):
            norm_j += X[i, j] * X[i, j]
        col_norms[j] = norm_j
    for i in range(n):
        resid[i] = y[i]
    for j in range(p):
        if w[j] != 0.0:
            for i in range(n):
                resid[i] -= w[j] * X[i, j]

    for it in range(max_iter):
        max_change = 0.0
        for j in range(p):
            norm_j = col_norms[j]
            if norm_j == 0.0:
                continue
            old = w[j]
            if old != 0.0:
                for i in range(n):
                    resid[i] += old * X[i, j]
            rho = 0.0
            for i in range(n):
                rho += X[i, j] * resid[i]
            if rho > half:
                new = (rho - half) / norm_j
            elif rho < -half:
                new = (rho + half) / norm_j
            else:
                new = 0.0
            w[j] = new
            if new != 0.0:
                for i in range(n):
                    resid[i] -= new * X[i, j]
            change = new - old
            if change < 0.0:
                change = -change
            if change > max_change:
                max_change = change
        if max_change <= tol:
            return it + 1, True
    return max_iter, False
