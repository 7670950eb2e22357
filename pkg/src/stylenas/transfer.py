"""Feature-statistics transfer modules: whitening-coloring (WCT) and AdaIN.

Both operate on (C, H, W) feature maps, matching second-order statistics
(WCT) or per-channel first/second moments (AdaIN) of the content features
to the style's. Content and style spatial extents may differ; only the
style statistics matter. A ``blend`` knob mixes the transferred features
with the originals.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, PreconditionError
from .tensor import REAL, as_tensor, assert_finite, snap_spectrum, sym_eig

ADAIN_EPS = 1e-5

# relative eigenvalue cutoff for the pseudo-inverse square root at eps=0
RANK_TOL = 1e-7


@dataclass
class TransferConfig:
    epsilon: float = 0.3
    blend: float = 1.0
    module_kind: str = "wct"

    def __post_init__(self):
        if self.epsilon < 0:
            raise PreconditionError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.blend <= 1.0:
            raise PreconditionError(f"blend must be in [0, 1], got {self.blend}")
        if self.module_kind not in ("wct", "adain"):
            raise PreconditionError(f"module_kind must be wct or adain, got {self.module_kind!r}")


@dataclass
class FeatureStats:
    """Channel mean, zero-mean features flattened to (C, H*W), and their
    sample covariance (H*W - 1 denominator)."""

    mean: np.ndarray
    centered: np.ndarray
    covariance: np.ndarray
    spatial: tuple = field(default=(0, 0))


def feature_stats(fmap):
    fmap = as_tensor(fmap, rank=3)
    c, h, w = fmap.shape
    if h * w < 1:
        raise PreconditionError("feature map has zero spatial extent")
    flat = fmap.reshape(c, h * w)
    mean = flat.mean(axis=1)
    centered = flat - mean[:, None]
    cov = (centered @ centered.T) / max(1, h * w - 1)
    return FeatureStats(mean=mean, centered=centered, covariance=cov, spatial=(h, w))


def _sym_eig_of_cov(cov):
    c64 = cov.astype(np.float64)
    return sym_eig((c64 + c64.T) / 2.0)


def _whitening_matrix(stats, epsilon):
    eig = _sym_eig_of_cov(stats.covariance)
    vals = snap_spectrum(eig.eigenvalues)
    shifted = vals + epsilon
    cutoff = RANK_TOL * max(float(shifted.max(initial=0.0)), 0.0)
    inv_sqrt = np.where(shifted > cutoff, 1.0 / np.sqrt(np.maximum(shifted, 1e-300)), 0.0)
    e = eig.eigenvectors.astype(np.float64)
    matrix = ((e * inv_sqrt) @ e.T).astype(REAL)
    assert_finite(matrix, "whitening matrix")
    return matrix


def _coloring_matrix(stats):
    eig = _sym_eig_of_cov(stats.covariance)
    vals = np.maximum(snap_spectrum(eig.eigenvalues), 0.0)
    e = eig.eigenvectors.astype(np.float64)
    matrix = ((e * np.sqrt(vals)) @ e.T).astype(REAL)
    assert_finite(matrix, "coloring matrix")
    return matrix


def whiten(stats, epsilon):
    """Decorrelate the centered features; with epsilon=0 and full-rank
    covariance the result has identity covariance."""
    if epsilon < 0:
        raise PreconditionError(f"epsilon must be >= 0, got {epsilon}")
    return _whitening_matrix(stats, epsilon) @ stats.centered


@dataclass
class StyleSide:
    """Precomputed style half of a transfer, reusable across content inputs."""

    kind: str
    mean: np.ndarray
    coloring: np.ndarray = None  # wct: (C, C) recoloring matrix
    std: np.ndarray = None  # adain: per-channel standard deviation
    channels: int = 0


def prepare_style_side(style_fmap, config):
    style_fmap = as_tensor(style_fmap, rank=3)
    c = style_fmap.shape[0]
    if config.module_kind == "wct":
        stats = feature_stats(style_fmap)
        return StyleSide(
            kind="wct", mean=stats.mean, coloring=_coloring_matrix(stats), channels=c
        )
    flat = style_fmap.reshape(c, -1)
    return StyleSide(
        kind="adain",
        mean=flat.mean(axis=1),
        std=np.sqrt(flat.var(axis=1)),
        channels=c,
    )


def apply_transfer(content_fmap, style_side, config):
    content_fmap = as_tensor(content_fmap, rank=3)
    c, h, w = content_fmap.shape
    if c != style_side.channels:
        raise DimensionError(
            f"content has {c} channels, style statistics have {style_side.channels}"
        )
    if config.blend == 0.0:
        return content_fmap.copy()

    if style_side.kind == "wct":
        stats = feature_stats(content_fmap)
        whitened = _whitening_matrix(stats, config.epsilon) @ stats.centered
        transferred = style_side.coloring @ whitened + style_side.mean[:, None]
        transferred = transferred.reshape(c, h, w)
    else:
        flat = content_fmap.reshape(c, -1)
        mu_c = flat.mean(axis=1)
        var_c = flat.var(axis=1)
        scaled = style_side.std[:, None] * (flat - mu_c[:, None]) / np.sqrt(
            var_c[:, None] + ADAIN_EPS
        )
        transferred = (scaled + style_side.mean[:, None]).reshape(c, h, w)

    if config.blend == 1.0:
        return transferred.astype(REAL, copy=False)
    mixed = config.blend * transferred + (1.0 - config.blend) * content_fmap
    return mixed.astype(REAL, copy=False)


def wct(content_fmap, style_fmap, config=None):
    """Whitening-coloring transfer of content features to style statistics."""
    config = config or TransferConfig()
    side = prepare_style_side(as_tensor(style_fmap, rank=3), TransferConfig(
        epsilon=config.epsilon, blend=config.blend, module_kind="wct"
    ))
    return apply_transfer(content_fmap, side, config)


def adain(content_fmap, style_fmap, config=None):
    """Per-channel mean/std alignment of content features to the style's."""
    config = config or TransferConfig(module_kind="adain")
    side = prepare_style_side(
        as_tensor(style_fmap, rank=3),
        TransferConfig(epsilon=config.epsilon, blend=config.blend, module_kind="adain"),
    )
    return apply_transfer(content_fmap, side, config)
