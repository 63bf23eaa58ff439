# Compiled twins of the hot kernels in _pykernels.py; same signatures,
# same accumulation order.

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, M_PI


def gaussian_loglik(double[::1] obs, double[:, ::1] means, double[:, ::1] stds):
    cdef Py_ssize_t n_ap = means.shape[0]
    cdef Py_ssize_t n_cells = means.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n_cells)
    cdef double[::1] out_v = out
    cdef Py_ssize_t a, c
    cdef double s, d, acc
    for c in range(n_cells):
        acc = 0.0
        for a in range(n_ap):
            s = stds[a, c]
            d = obs[a] - means[a, c]
            acc += -0.5 * log(2.0 * M_PI * s * s) - d * d / (2.0 * s * s)
        out_v[c] = acc
    return out


def se_kernel(double[:, ::1] a, double[:, ::1] b, double sigma_f, double ell):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, m))
    cdef double[:, ::1] out_v = out
    cdef Py_ssize_t i, j
    cdef double dx, dy, sf2 = sigma_f * sigma_f
    cdef double inv = 1.0 / (2.0 * ell * ell)
    for i in range(n):
        for j in range(m):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            out_v[i, j] = sf2 * exp(-(dx * dx + dy * dy) * inv)
    return out
