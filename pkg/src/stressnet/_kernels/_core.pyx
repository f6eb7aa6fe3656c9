# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled mirrors of the NumPy kernels in _fallback.py. Summation order is
# the plain nested-loop order; results agree with the fallback to float64
# rounding. All arrays must be C-contiguous float64 (int64 for indices).

import numpy as np

cimport numpy as cnp

cnp.import_array()


def ti_conv_forward(double[:, :, :, ::1] x, double[:, :, ::1] k):
    cdef Py_ssize_t b = x.shape[0], h = x.shape[1], w = x.shape[2], t = x.shape[3]
    cdef Py_ssize_t d = k.shape[0]
    cdef Py_ssize_t ho = h - d + 1, wo = w - d + 1
    cdef cnp.ndarray[double, ndim=4] out = np.zeros((b, ho, wo, t), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t bb, i, j, a, c, tt
    cdef double kv
    for bb in range(b):
        for i in range(ho):
            for j in range(wo):
                for a in range(d):
                    for c in range(d):
                        for tt in range(t):
                            y[bb, i, j, tt] += k[a, c, tt] * x[bb, i + a, j + c, tt]
    return out


def ti_conv_backward_kernel(double[:, :, :, ::1] x, double[:, :, :, ::1] gy, Py_ssize_t d):
    cdef Py_ssize_t b = x.shape[0], t = x.shape[3]
    cdef Py_ssize_t ho = gy.shape[1], wo = gy.shape[2]
    cdef cnp.ndarray[double, ndim=3] out = np.zeros((d, d, t), dtype=np.float64)
    cdef double[:, :, ::1] gk = out
    cdef Py_ssize_t bb, i, j, a, c, tt
    for bb in range(b):
        for i in range(ho):
            for j in range(wo):
                for a in range(d):
                    for c in range(d):
                        for tt in range(t):
                            gk[a, c, tt] += gy[bb, i, j, tt] * x[bb, i + a, j + c, tt]
    return out


def ti_conv_backward_input(double[:, :, ::1] k, double[:, :, :, ::1] gy,
                           Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t b = gy.shape[0], ho = gy.shape[1], wo = gy.shape[2], t = gy.shape[3]
    cdef Py_ssize_t d = k.shape[0]
    cdef cnp.ndarray[double, ndim=4] out = np.zeros((b, h, w, t), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = out
    cdef Py_ssize_t bb, i, j, a, c, tt
    for bb in range(b):
        for i in range(ho):
            for j in range(wo):
                for a in range(d):
                    for c in range(d):
                        for tt in range(t):
                            gx[bb, i + a, j + c, tt] += gy[bb, i, j, tt] * k[a, c, tt]
    return out


def max_pool_forward(double[:, :, :, ::1] x, Py_ssize_t d):
    cdef Py_ssize_t b = x.shape[0], h = x.shape[1], w = x.shape[2], t = x.shape[3]
    cdef Py_ssize_t hb = h / d, wb = w / d
    cdef cnp.ndarray[double, ndim=4] yout = np.empty((b, hb, wb, t), dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=4] iout = np.zeros((b, hb, wb, t), dtype=np.int64)
    cdef double[:, :, :, ::1] y = yout
    cdef cnp.int64_t[:, :, :, ::1] idx = iout
    cdef Py_ssize_t bb, i, j, a, c, tt
    cdef double best, v
    cdef Py_ssize_t besti
    for bb in range(b):
        for i in range(hb):
            for j in range(wb):
                for tt in range(t):
                    best = x[bb, i * d, j * d, tt]
                    besti = 0
                    for a in range(d):
                        for c in range(d):
                            v = x[bb, i * d + a, j * d + c, tt]
                            if v > best:  # strict: ties keep the first index
                                best = v
                                besti = a * d + c
                    y[bb, i, j, tt] = best
                    idx[bb, i, j, tt] = besti
    return yout, iout


def max_pool_backward(double[:, :, :, ::1] gy, cnp.int64_t[:, :, :, ::1] idx,
                      Py_ssize_t d, Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t b = gy.shape[0], hb = gy.shape[1], wb = gy.shape[2], t = gy.shape[3]
    cdef cnp.ndarray[double, ndim=4] out = np.zeros((b, h, w, t), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = out
    cdef Py_ssize_t bb, i, j, tt, flat
    for bb in range(b):
        for i in range(hb):
            for j in range(wb):
                for tt in range(t):
                    flat = idx[bb, i, j, tt]
                    gx[bb, i * d + flat / d, j * d + flat % d, tt] += gy[bb, i, j, tt]
    return out


def avg_pool_forward(double[:, :, :, ::1] x, Py_ssize_t d):
    cdef Py_ssize_t b = x.shape[0], h = x.shape[1], w = x.shape[2], t = x.shape[3]
    cdef Py_ssize_t hb = h / d, wb = w / d
    cdef cnp.ndarray[double, ndim=4] out = np.zeros((b, hb, wb, t), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out
    cdef double inv = 1.0 / (d * d)
    cdef Py_ssize_t bb, i, j, a, c, tt
    for bb in range(b):
        for i in range(hb):
            for j in range(wb):
                for a in range(d):
                    for c in range(d):
                        for tt in range(t):
                            y[bb, i, j, tt] += x[bb, i * d + a, j * d + c, tt] * inv
    return out


def avg_pool_backward(double[:, :, :, ::1] gy, Py_ssize_t d, Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t b = gy.shape[0], hb = gy.shape[1], wb = gy.shape[2], t = gy.shape[3]
    cdef cnp.ndarray[double, ndim=4] out = np.empty((b, h, w, t), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = out
    cdef double inv = 1.0 / (d * d)
    cdef Py_ssize_t bb, i, j, tt
    for bb in range(b):
        for i in range(h):
            for j in range(w):
                for tt in range(t):
                    gx[bb, i, j, tt] = gy[bb, i / d, j / d, tt] * inv
    return out
