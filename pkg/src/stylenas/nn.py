"""CNN op set: forward and reverse-mode gradient for each operator.

Every op is a pure function over (C, H, W) float32 maps. Convolutions are
3x3, stride 1, reflection padded, so spatial size never changes except
through the explicit pooling/upsampling ops. Gradient conventions:
relu'(0) = 0, maxpool ties break toward the smallest flat index.
"""

from dataclasses import dataclass

import numpy as np

from ._kernels import conv3x3_backward, conv3x3_forward
from .errors import DimensionError
from .tensor import as_tensor

INSTANCE_NORM_EPS = 1e-5


@dataclass
class ConvLayer:
    """3x3 convolution parameters: weights (C_out, C_in, 3, 3), bias (C_out,)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = as_tensor(self.weights, rank=4)
        self.bias = as_tensor(self.bias, rank=1)
        if self.weights.shape[2:] != (3, 3):
            raise DimensionError(f"kernel must be 3x3, got {self.weights.shape[2:]}")
        if self.bias.shape[0] != self.weights.shape[0]:
            raise DimensionError("bias length must match output channels")

    @property
    def in_channels(self):
        return self.weights.shape[1]

    @property
    def out_channels(self):
        return self.weights.shape[0]


def conv_forward(layer, x):
    x = as_tensor(x, rank=3)
    if x.shape[0] != layer.in_channels:
        raise DimensionError(
            f"input has {x.shape[0]} channels, layer expects {layer.in_channels}"
        )
    return conv3x3_forward(x, layer.weights, layer.bias)


def conv_backward(layer, x, grad_out):
    x = as_tensor(x, rank=3)
    grad_out = as_tensor(grad_out, rank=3)
    if x.shape[0] != layer.in_channels:
        raise DimensionError(
            f"input has {x.shape[0]} channels, layer expects {layer.in_channels}"
        )
    if grad_out.shape != (layer.out_channels, x.shape[1], x.shape[2]):
        raise DimensionError(
            f"grad_out shape {grad_out.shape} inconsistent with conv output "
            f"{(layer.out_channels, x.shape[1], x.shape[2])}"
        )
    return conv3x3_backward(x, layer.weights, grad_out)


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, grad_out):
    return np.where(x > 0.0, grad_out, 0.0)


@dataclass
class PoolRecord:
    """2x2 max-pool output plus per-cell argmax (flat H*W index per channel)."""

    pooled: np.ndarray
    argmax_indices: np.ndarray
    input_shape: tuple


def maxpool2(x):
    x = as_tensor(x, rank=3)
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise DimensionError(f"maxpool2 needs even spatial dims, got {h}x{w}")
    win = x.reshape(c, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4)
    flat = win.reshape(c, h // 2, w // 2, 4)
    # argmax picks the first maximum: window cells are ordered by flat
    # index, so ties break toward the smallest one
    local = flat.argmax(axis=3)
    rows = (np.arange(h // 2)[:, None] * 2) + local // 2
    cols = (np.arange(w // 2)[None, :] * 2) + local % 2
    idx = (rows * w + cols).astype(np.int64)
    pooled = np.take_along_axis(flat, local[..., None], axis=3)[..., 0]
    return PoolRecord(pooled=np.ascontiguousarray(pooled), argmax_indices=idx, input_shape=(c, h, w))


def unpool(record, values=None):
    """Scatter ``values`` (default: the pooled map) back to the argmax cells."""
    vals = record.pooled if values is None else as_tensor(values, rank=3)
    if vals.shape != record.pooled.shape:
        raise DimensionError(
            f"values shape {vals.shape} does not match pooled shape {record.pooled.shape}"
        )
    c, h, w = record.input_shape
    out = np.zeros((c, h * w), dtype=vals.dtype)
    np.put_along_axis(out, record.argmax_indices.reshape(c, -1), vals.reshape(c, -1), axis=1)
    return out.reshape(c, h, w)


def upsample_nearest(x):
    x = as_tensor(x, rank=3)
    return np.repeat(np.repeat(x, 2, axis=1), 2, axis=2)


def upsample_nearest_backward(grad_out):
    g = as_tensor(grad_out, rank=3)
    c, h, w = g.shape
    return g.reshape(c, h // 2, 2, w // 2, 2).sum(axis=(2, 4))


def instance_norm(x):
    x = as_tensor(x, rank=3)
    mu = x.mean(axis=(1, 2), keepdims=True)
    var = x.var(axis=(1, 2), keepdims=True)
    return (x - mu) / np.sqrt(var + INSTANCE_NORM_EPS)


def instance_norm_backward(x, grad_out):
    x = as_tensor(x, rank=3)
    g = as_tensor(grad_out, rank=3)
    mu = x.mean(axis=(1, 2), keepdims=True)
    var = x.var(axis=(1, 2), keepdims=True)
    inv = 1.0 / np.sqrt(var + INSTANCE_NORM_EPS)
    xn = (x - mu) * inv
    gm = g.mean(axis=(1, 2), keepdims=True)
    gxn = (g * xn).mean(axis=(1, 2), keepdims=True)
    return inv * (g - gm - xn * gxn)


def concat_channels(xs):
    xs = [as_tensor(x, rank=3) for x in xs]
    spatial = {x.shape[1:] for x in xs}
    if len(spatial) != 1:
        raise DimensionError(f"concat operands disagree on spatial dims: {sorted(spatial)}")
    return np.concatenate(xs, axis=0)


def split_channels(y, sizes):
    """Inverse of concat_channels for the given channel counts."""
    if sum(sizes) != y.shape[0]:
        raise DimensionError(f"split sizes {sizes} do not sum to {y.shape[0]} channels")
    return np.split(y, np.cumsum(sizes)[:-1], axis=0)


def sum_maps(xs):
    xs = [as_tensor(x, rank=3) for x in xs]
    shapes = {x.shape for x in xs}
    if len(shapes) != 1:
        raise DimensionError(f"sum operands disagree on shape: {sorted(shapes)}")
    out = xs[0].copy()
    for x in xs[1:]:
        out += x
    return out


def resize_nearest(x, target_h, target_w):
    x = as_tensor(x, rank=3)
    if target_h < 1 or target_w < 1:
        raise DimensionError("resize target dims must be >= 1")
    _, h, w = x.shape
    rows = (np.arange(target_h) * h) // target_h
    cols = (np.arange(target_w) * w) // target_w
    return np.ascontiguousarray(x[:, rows[:, None], cols[None, :]])


def resize_nearest_backward(grad_out, source_h, source_w):
    g = as_tensor(grad_out, rank=3)
    c, th, tw = g.shape
    rows = (np.arange(th) * source_h) // th
    cols = (np.arange(tw) * source_w) // tw
    gx = np.zeros((c, source_h, source_w), dtype=g.dtype)
    np.add.at(gx, (slice(None), rows[:, None], cols[None, :]), g)
    return gx
