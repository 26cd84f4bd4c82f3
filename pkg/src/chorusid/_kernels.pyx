# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled distance kernels: dense query vs CSR bank of sparse histograms.

Mirrors _kernels_np.py; see there for the contract.
"""

import numpy as np

from libc.math cimport fabs, log, sqrt


def l1_csr(double[::1] q, int[::1] indices, double[::1] masses,
           long long[::1] offsets):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef double q_total = 0.0
    cdef Py_ssize_t i, j
    cdef long long k
    cdef double acc, qi
    for i in range(q.shape[0]):
        q_total += q[i]
    with nogil:
        for j in range(n):
            acc = 0.0
            for k in range(offsets[j], offsets[j + 1]):
                qi = q[indices[k]]
                acc += fabs(qi - masses[k]) - qi
            out_v[j] = q_total + acc
    return out


def hellinger_csr(double[::1] q, int[::1] indices, double[::1] masses,
                  long long[::1] offsets):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef Py_ssize_t j
    cdef long long k
    cdef double acc
    with nogil:
        for j in range(n):
            acc = 0.0
            for k in range(offsets[j], offsets[j + 1]):
                acc += sqrt(q[indices[k]] * masses[k])
            out_v[j] = 1.0 - acc
    return out


def kl_csr(double[::1] a_tilde, double h_a, double eps, Py_ssize_t n_bins,
           int[::1] indices, double[::1] masses, long long[::1] offsets,
           double[::1] inst_sums):
    cdef Py_ssize_t n = offsets.shape[0] - 1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] out_v = out
    cdef double ln_eps = log(eps)
    cdef Py_ssize_t j
    cdef long long k
    cdef double acc1, acc2, at
    with nogil:
        for j in range(n):
            acc1 = 0.0
            acc2 = 0.0
            for k in range(offsets[j], offsets[j + 1]):
                at = a_tilde[indices[k]]
                acc1 += at * log(masses[k] + eps)
                acc2 += at
            out_v[j] = h_a - acc1 - (1.0 - acc2) * ln_eps + log(inst_sums[j] + n_bins * eps)
    return out
