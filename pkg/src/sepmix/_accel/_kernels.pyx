# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Same contracts as `sepmix._accel.kernels_py`.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def fir_rational_filter(h, x, int up, int down, int delay, Py_ssize_t n_out):
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_out, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t n_h = hv.shape[0]
    cdef Py_ssize_t n_in = xv.shape[0]
    cdef Py_ssize_t j, k, i, t0, k0
    cdef double acc
    for j in range(n_out):
        t0 = j * down + delay
        # only taps aligned with non-zero (stuffed) samples contribute
        k0 = t0 % up
        acc = 0.0
        k = k0
        while k < n_h:
            i = (t0 - k) // up
            if 0 <= i < n_in:
                acc += hv[k] * xv[i]
            k += up
        ov[j] = acc
    return out


def biquad_cascade(sos, x):
    cdef const double[:, ::1] sv = np.ascontiguousarray(sos, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.array(x, dtype=np.float64, copy=True, order="C")
    cdef double[::1] yv = y
    cdef Py_ssize_t n = yv.shape[0]
    cdef Py_ssize_t n_sec = sv.shape[0]
    cdef Py_ssize_t s, i
    cdef double b0, b1, b2, a1, a2, w1, w2, xn, yn
    if sv.shape[1] != 6:
        raise ValueError("sos must have shape (sections, 6)")
    for s in range(n_sec):
        b0 = sv[s, 0]; b1 = sv[s, 1]; b2 = sv[s, 2]
        a1 = sv[s, 4]; a2 = sv[s, 5]
        # direct form II transposed
        w1 = 0.0; w2 = 0.0
        for i in range(n):
            xn = yv[i]
            yn = b0 * xn + w1
            w1 = b1 * xn - a1 * yn + w2
            w2 = b2 * xn - a2 * yn
            yv[i] = yn
    return y


def overlap_add(frames, Py_ssize_t hop, Py_ssize_t out_len):
    cdef const double[:, ::1] fv = np.ascontiguousarray(frames, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(out_len, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t n_frames = fv.shape[0]
    cdef Py_ssize_t win = fv.shape[1]
    cdef Py_ssize_t t, n, start
    for t in range(n_frames):
        start = t * hop
        if start >= out_len:
            break
        for n in range(win):
            if start + n >= out_len:
                break
            ov[start + n] += fv[t, n]
    return out
