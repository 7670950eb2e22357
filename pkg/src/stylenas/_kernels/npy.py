"""NumPy fallback kernels.

Same contracts as the compiled backend in ``_core``: 3x3 stride-1
convolution with reflection padding (forward and backward) and a cyclic
Jacobi eigensolver for symmetric matrices. Selected automatically when
the extension is not built; force with STYLENAS_BACKEND=numpy.
"""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .common import fold_reflect_grad, reflect_pad

NAME = "numpy"


def _im2col(xp, h, w):
    # (C, H+2, W+2) -> (C*9, H*W) patch matrix
    c = xp.shape[0]
    win = sliding_window_view(xp, (3, 3), axis=(1, 2))  # (C, H, W, 3, 3)
    return np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(c * 9, h * w)


def conv3x3_forward(x, weight, bias):
    c_out = weight.shape[0]
    _, h, w = x.shape
    cols = _im2col(reflect_pad(x), h, w)
    y = weight.reshape(c_out, -1) @ cols
    y += bias[:, None]
    return y.reshape(c_out, h, w)


def conv3x3_backward(x, weight, grad_out):
    c_out, c_in = weight.shape[:2]
    _, h, w = x.shape
    cols = _im2col(reflect_pad(x), h, w)
    go2 = grad_out.reshape(c_out, h * w)

    grad_b = go2.sum(axis=1)
    grad_w = (go2 @ cols.T).reshape(c_out, c_in, 3, 3)

    gcols = weight.reshape(c_out, -1).T @ go2  # (C_in*9, H*W)
    gcols = gcols.reshape(c_in, 3, 3, h, w)
    gxp = np.zeros((c_in, h + 2, w + 2), dtype=x.dtype)
    for ky in range(3):
        for kx in range(3):
            gxp[:, ky : ky + h, kx : kx + w] += gcols[:, ky, kx]
    return fold_reflect_grad(gxp), grad_w, grad_b


def _off_norm(a):
    return math.sqrt(max(0.0, 2.0 * float((np.triu(a, 1) ** 2).sum())))


def jacobi_eigh(a, max_sweeps, tol_factor=1e-10):
    """Cyclic Jacobi diagonalization of a symmetric float64 matrix.

    Returns (eigenvalues, eigenvectors-as-columns, converged, sweeps); the
    spectrum is unsorted here, callers order and sign-fix it.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.diagonal(a).copy(), v, True, 0

    threshold = tol_factor * math.sqrt(float((a * a).sum()))
    converged = False
    sweeps = 0
    for sweep in range(max_sweeps):
        if _off_norm(a) <= threshold:
            converged = True
            break
        sweeps = sweep + 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                app, aqq = a[p, p], a[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                new_p = c * col_p - s * col_q
                new_q = s * col_p + c * col_q
                a[:, p] = new_p
                a[p, :] = new_p
                a[:, q] = new_q
                a[q, :] = new_q
                # the vector update clobbered the 2x2 pivot block; restore
                # its closed-form values
                a[p, p] = app - t * apq
                a[q, q] = aqq + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        converged = _off_norm(a) <= threshold

    return np.diagonal(a).copy(), v, converged, sweeps
