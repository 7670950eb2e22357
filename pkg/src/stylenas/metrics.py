"""Quantitative evaluation: SSIM on whole images and edge maps, Gram loss,
and the three search objectives (reconstruction error vs the oracle,
perceptual distance vs the oracle, operator fraction) combined linearly.

All metric math runs in float64; these paths are off the training hot
loop and the SSIM oracle agreement is tight.
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .arch import CODE_LENGTH
from .errors import DimensionError, InputError, PreconditionError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = (size - 1) / 2
    g = np.exp(-((np.arange(size) - half) ** 2) / (2 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


_WINDOW = _gaussian_window()


def luma(image):
    """Rec.601 luma of an RGB (3, H, W) image."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[0] != 3:
        raise DimensionError(f"expected an RGB (3, H, W) image, got shape {img.shape}")
    return 0.299 * img[0] + 0.587 * img[1] + 0.114 * img[2]


def _ssim_map(a, b, data_range=1.0):
    if a.shape != b.shape:
        raise DimensionError(f"image dims disagree: {a.shape} vs {b.shape}")
    h, w = a.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise DimensionError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {h}x{w}"
        )
    c1 = (SSIM_K1 * data_range) ** 2
    c2 = (SSIM_K2 * data_range) ** 2
    wa = sliding_window_view(a, (SSIM_WINDOW, SSIM_WINDOW))
    wb = sliding_window_view(b, (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = np.tensordot(wa, _WINDOW, axes=([2, 3], [0, 1]))
    mu_b = np.tensordot(wb, _WINDOW, axes=([2, 3], [0, 1]))
    e_aa = np.tensordot(wa * wa, _WINDOW, axes=([2, 3], [0, 1]))
    e_bb = np.tensordot(wb * wb, _WINDOW, axes=([2, 3], [0, 1]))
    e_ab = np.tensordot(wa * wb, _WINDOW, axes=([2, 3], [0, 1]))
    var_a = e_aa - mu_a**2
    var_b = e_bb - mu_b**2
    cov = e_ab - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return num / den


def ssim(a, b):
    """SSIM index between two RGB images, computed on luma over all valid
    11x11 Gaussian window positions."""
    return float(np.mean(_ssim_map(luma(a), luma(b))))


def sobel_edges(image):
    """3x3 Sobel gradient magnitude of the luma, normalized to [0, 1] by the
    per-image maximum (zero maps stay zero)."""
    lum = luma(image)
    padded = np.pad(lum, 1, mode="reflect")
    win = sliding_window_view(padded, (3, 3))
    gx = np.tensordot(win, _SOBEL_X, axes=([2, 3], [0, 1]))
    gy = np.tensordot(win, _SOBEL_Y, axes=([2, 3], [0, 1]))
    mag = np.sqrt(gx**2 + gy**2)
    peak = mag.max()
    return mag / peak if peak > 0 else mag


def ssim_edge(a, b):
    """SSIM computed on Sobel edge-magnitude maps of the two images."""
    ea = sobel_edges(a)
    eb = sobel_edges(b)
    return float(np.mean(_ssim_map(ea, eb)))


def gram_matrix(fmap):
    """Channel Gram matrix of a (C, H, W) feature map, normalized by C*H*W."""
    c, h, w = fmap.shape
    flat = fmap.reshape(c, h * w).astype(np.float64)
    return flat @ flat.T / (c * h * w)


def gram_loss(result, style, encoder):
    """Sum over encoder stages of squared Frobenius distance between the
    normalized channel Gram matrices of the two images' features."""
    taps_r = encoder.encode(np.asarray(result, dtype=np.float32))
    taps_s = encoder.encode(np.asarray(style, dtype=np.float32))
    total = 0.0
    for fr, fs in zip(taps_r, taps_s):
        d = gram_matrix(fr) - gram_matrix(fs)
        total += float((d * d).sum())
    return total


@dataclass
class ObjectiveWeights:
    alpha: float = 0.8
    beta: float = 0.1
    gamma: float = 0.1

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise PreconditionError("objective weights must be non-negative")
        if abs(self.alpha + self.beta + self.gamma - 1.0) > 1e-9:
            raise PreconditionError(
                f"objective weights must sum to 1, got {self.alpha + self.beta + self.gamma}"
            )


@dataclass
class EvalReport:
    recon_error: float
    perceptual: float
    op_fraction: float
    overall: float
    ssim_whole: float = None
    ssim_edge: float = None
    gram_loss: float = None


def _rms_frobenius(a, b):
    d = a.astype(np.float64) - b.astype(np.float64)
    return float(np.sqrt((d * d).sum() / d.size))


def objective(candidate_outputs, oracle_outputs, code, weights, encoder):
    """Score a candidate's stylized outputs against the oracle's.

    Reconstruction error is the mean per-element RMS distance between
    output images; the perceptual term sums per-stage RMS distances
    between encoder features of the outputs. Both are normalized per
    element so the weights mean the same thing at any image size.
    """
    if len(candidate_outputs) != len(oracle_outputs):
        raise InputError(
            f"{len(candidate_outputs)} candidate outputs vs "
            f"{len(oracle_outputs)} oracle outputs"
        )
    if not candidate_outputs:
        raise InputError("objective needs at least one validation output pair")

    recon = 0.0
    percep = 0.0
    for cand, orac in zip(candidate_outputs, oracle_outputs):
        recon += _rms_frobenius(cand, orac)
        taps_c = encoder.encode(np.asarray(cand, dtype=np.float32))
        taps_o = encoder.encode(np.asarray(orac, dtype=np.float32))
        percep += sum(_rms_frobenius(tc, to) for tc, to in zip(taps_c, taps_o))
    recon /= len(candidate_outputs)
    percep /= len(candidate_outputs)

    frac = code.popcount() / CODE_LENGTH
    overall = weights.alpha * recon + weights.beta * percep + weights.gamma * frac
    return EvalReport(
        recon_error=recon, perceptual=percep, op_fraction=frac, overall=overall
    )
