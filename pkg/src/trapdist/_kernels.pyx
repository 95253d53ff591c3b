# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled consensus kernel for robust affine fitting.

Must stay arithmetic-identical to trapdist._kernels_py (same operations in
the same order), so either backend picks the same candidate model.
"""

from libc.math cimport fabs, NAN

import numpy as np
cimport numpy as cnp


def ransac_consensus(
    double[::1] x not None,
    double[::1] y not None,
    cnp.int64_t[:, ::1] samples not None,
    double threshold,
):
    """Score candidate affine models y ~ m*x + c over sampled point sets.

    See trapdist._kernels_py.ransac_consensus for the contract.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t iterations = samples.shape[0]
    cdef Py_ssize_t k = samples.shape[1]
    cdef double kf = <double> k
    cdef Py_ssize_t i, j, idx, count
    cdef double sx, sy, sxx, sxy, den, m, c, xi, yi
    cdef double best_m = NAN
    cdef double best_c = NAN
    cdef Py_ssize_t best_count = 0

    with nogil:
        for i in range(iterations):
            sx = 0.0
            sy = 0.0
            sxx = 0.0
            sxy = 0.0
            for j in range(k):
                idx = samples[i, j]
                xi = x[idx]
                yi = y[idx]
                sx += xi
                sy += yi
                sxx += xi * xi
                sxy += xi * yi
            den = kf * sxx - sx * sx
            if den == 0.0:
                continue
            m = (kf * sxy - sx * sy) / den
            c = (sy - m * sx) / kf
            count = 0
            for j in range(n):
                if fabs(m * x[j] + c - y[j]) <= threshold:
                    count += 1
            if count > best_count:
                best_count = count
                best_m = m
                best_c = c

    return best_m, best_c, int(best_count)
