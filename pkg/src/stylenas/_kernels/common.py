"""Helpers shared by the compiled and NumPy kernel backends."""

import numpy as np


def reflect_pad(x):
    """Pad a (C, H, W) map by one pixel of reflection on each spatial edge.

    Size-1 axes replicate the single value (NumPy 'reflect' semantics).
    """
    c, h, w = x.shape
    out = np.empty((c, h + 2, w + 2), dtype=x.dtype)
    out[:, 1 : h + 1, 1 : w + 1] = x
    top = 1 if h > 1 else 0
    bottom = h - 2 if h > 1 else 0
    left = 1 if w > 1 else 0
    right = w - 2 if w > 1 else 0
    out[:, 0, 1 : w + 1] = x[:, top, :]
    out[:, h + 1, 1 : w + 1] = x[:, bottom, :]
    out[:, :, 0] = out[:, :, left + 1]
    out[:, :, w + 1] = out[:, :, right + 1]
    return out


def fold_reflect_grad(gxp):
    """Adjoint of :func:`reflect_pad`: fold border gradients back inside.

    ``gxp`` has shape (C, H+2, W+2); returns the (C, H, W) gradient. Rows
    are folded before columns; the two reflections are independent so the
    corner cells compose correctly either way.
    """
    c, hp, wp = gxp.shape
    h, w = hp - 2, wp - 2
    g = gxp.copy()
    g[:, 2 if h > 1 else 1, :] += g[:, 0, :]
    g[:, h - 1 if h > 1 else 1, :] += g[:, h + 1, :]
    g[:, :, 2 if w > 1 else 1] += g[:, :, 0]
    g[:, :, w - 1 if w > 1 else 1] += g[:, :, w + 1]
    return np.ascontiguousarray(g[:, 1 : h + 1, 1 : w + 1])
