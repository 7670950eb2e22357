# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: 3x3 reflection-padded convolution and cyclic Jacobi.

Mirrors the contracts of the NumPy backend in ``npy.py``; see that module
for the reference semantics.
"""

import numpy as np

cimport cython
from libc.math cimport fabs, sqrt

from .common import fold_reflect_grad, reflect_pad

NAME = "compiled"


def conv3x3_forward(x, weight, bias):
    cdef float[:, :, ::1] xv = reflect_pad(np.ascontiguousarray(x, dtype=np.float32))
    cdef float[:, :, :, ::1] wv = np.ascontiguousarray(weight, dtype=np.float32)
    cdef float[::1] bv = np.ascontiguousarray(bias, dtype=np.float32)
    cdef Py_ssize_t c_out = wv.shape[0], c_in = wv.shape[1]
    cdef Py_ssize_t h = xv.shape[1] - 2, w = xv.shape[2] - 2
    y = np.empty((c_out, h, w), dtype=np.float32)
    cdef float[:, :, ::1] yv = y
    cdef Py_ssize_t co, ci, ky, kx, i, j
    cdef float wval, bval
    with nogil:
        for co in range(c_out):
            bval = bv[co]
            for i in range(h):
                for j in range(w):
                    yv[co, i, j] = bval
            for ci in range(c_in):
                for ky in range(3):
                    for kx in range(3):
                        wval = wv[co, ci, ky, kx]
                        for i in range(h):
                            for j in range(w):
                                yv[co, i, j] += wval * xv[ci, i + ky, j + kx]
    return y


def conv3x3_backward(x, weight, grad_out):
    cdef float[:, :, ::1] xv = reflect_pad(np.ascontiguousarray(x, dtype=np.float32))
    cdef float[:, :, :, ::1] wv = np.ascontiguousarray(weight, dtype=np.float32)
    cdef float[:, :, ::1] gov = np.ascontiguousarray(grad_out, dtype=np.float32)
    cdef Py_ssize_t c_out = wv.shape[0], c_in = wv.shape[1]
    cdef Py_ssize_t h = gov.shape[1], w = gov.shape[2]

    gxp = np.zeros((c_in, h + 2, w + 2), dtype=np.float32)
    grad_w = np.zeros((c_out, c_in, 3, 3), dtype=np.float32)
    grad_b = np.zeros(c_out, dtype=np.float32)
    cdef float[:, :, ::1] gxv = gxp
    cdef float[:, :, :, ::1] gwv = grad_w
    cdef float[::1] gbv = grad_b
    cdef Py_ssize_t co, ci, ky, kx, i, j
    cdef float wval, g, gw_acc, gb_acc
    with nogil:
        for co in range(c_out):
            gb_acc = 0.0
            for i in range(h):
                for j in range(w):
                    gb_acc += gov[co, i, j]
            gbv[co] = gb_acc
            for ci in range(c_in):
                for ky in range(3):
                    for kx in range(3):
                        wval = wv[co, ci, ky, kx]
                        gw_acc = 0.0
                        for i in range(h):
                            for j in range(w):
                                g = gov[co, i, j]
                                gw_acc += g * xv[ci, i + ky, j + kx]
                                gxv[ci, i + ky, j + kx] += g * wval
                        gwv[co, ci, ky, kx] = gw_acc
    return fold_reflect_grad(gxp), grad_w, grad_b


def jacobi_eigh(a, int max_sweeps, double tol_factor=1e-10):
    arr = np.array(a, dtype=np.float64)
    cdef Py_ssize_t n = arr.shape[0]
    vecs = np.eye(n)
    if n == 1:
        return np.diagonal(arr).copy(), vecs, True, 0

    cdef double[:, ::1] av = arr
    cdef double[:, ::1] vv = vecs
    cdef double threshold = tol_factor * sqrt(float((arr * arr).sum()))
    cdef bint converged = False
    cdef int sweeps = 0, sweep
    cdef Py_ssize_t p, q, i
    cdef double apq, app, aqq, theta, t, c, s, off2, aip, aiq, vip, viq

    with nogil:
        for sweep in range(max_sweeps):
            off2 = 0.0
            for p in range(n - 1):
                for q in range(p + 1, n):
                    off2 += 2.0 * av[p, q] * av[p, q]
            if sqrt(off2) <= threshold:
                converged = True
                break
            sweeps = sweep + 1
            for p in range(n - 1):
                for q in range(p + 1, n):
                    apq = av[p, q]
                    if apq == 0.0:
                        continue
                    app = av[p, p]
                    aqq = av[q, q]
                    theta = (aqq - app) / (2.0 * apq)
                    t = (1.0 if theta >= 0.0 else -1.0) / (fabs(theta) + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(t * t + 1.0)
                    s = t * c
                    for i in range(n):
                        aip = av[i, p]
                        aiq = av[i, q]
                        av[i, p] = c * aip - s * aiq
                        av[i, q] = s * aip + c * aiq
                    for i in range(n):
                        av[p, i] = av[i, p]
                        av[q, i] = av[i, q]
                    av[p, p] = app - t * apq
                    av[q, q] = aqq + t * apq
                    av[p, q] = 0.0
                    av[q, p] = 0.0
                    for i in range(n):
                        vip = vv[i, p]
                        viq = vv[i, q]
                        vv[i, p] = c * vip - s * viq
                        vv[i, q] = s * vip + c * viq
        else:
            off2 = 0.0
            for p in range(n - 1):
                for q in range(p + 1, n):
                    off2 += 2.0 * av[p, q] * av[p, q]
            converged = sqrt(off2) <= threshold

    return np.diagonal(arr).copy(), vecs, bool(converged), sweeps
