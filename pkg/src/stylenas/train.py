"""Decoder training by image reconstruction, with the encoder frozen.

Transfer sites are disabled for the whole run; only decoder parameters
receive Adam updates. This is the per-candidate training step of both the
construction phase and every architecture evaluation during the search,
so it is deliberately cheap: encoder taps are computed once per corpus
image and cached.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import arch, nn
from .errors import InputError, PreconditionError, TrainingDivergedError
from .tensor import REAL

PSNR_CAP_DB = 99.0


@dataclass
class TrainConfig:
    steps: int = 300
    batch: int = 4
    learning_rate: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    image_size: int = 64

    def __post_init__(self):
        if self.steps < 1:
            raise PreconditionError("steps must be >= 1")
        if self.batch < 1:
            raise PreconditionError("batch must be >= 1")
        if self.learning_rate <= 0:
            raise PreconditionError("learning_rate must be > 0")


@dataclass
class Corpus:
    """A list of RGB images in [0, 1] with dims divisible by 16."""

    images: list
    source: str = "procedural"

    def __post_init__(self):
        if not self.images:
            raise InputError("corpus is empty")
        for i, img in enumerate(self.images):
            if img.ndim != 3 or img.shape[0] != 3:
                raise InputError(f"corpus item {i} is not an RGB (3, H, W) image")
            if img.shape[1] % arch.SPATIAL_MULTIPLE or img.shape[2] % arch.SPATIAL_MULTIPLE:
                raise InputError(
                    f"corpus item {i} dims must be divisible by {arch.SPATIAL_MULTIPLE}"
                )

    def __len__(self):
        return len(self.images)


def _gradient_image(rng, size):
    h = w = size
    angle = rng.uniform(0, 2 * np.pi)
    ramp = (
        np.cos(angle) * np.linspace(0, 1, w)[None, :]
        + np.sin(angle) * np.linspace(0, 1, h)[:, None]
    )
    ramp = (ramp - ramp.min()) / max(np.ptp(ramp), 1e-6)
    c0 = rng.uniform(0, 1, 3)
    c1 = rng.uniform(0, 1, 3)
    return (c0[:, None, None] * (1 - ramp) + c1[:, None, None] * ramp).astype(REAL)


def _checkerboard_image(rng, size):
    cell = int(rng.choice([4, 8, 16]))
    h = w = size
    yy, xx = np.meshgrid(np.arange(h) // cell, np.arange(w) // cell, indexing="ij")
    mask = ((yy + xx) % 2).astype(REAL)
    c0 = rng.uniform(0, 1, 3).astype(REAL)
    c1 = rng.uniform(0, 1, 3).astype(REAL)
    return c0[:, None, None] * (1 - mask) + c1[:, None, None] * mask


def _filtered_noise_image(rng, size):
    noise = rng.uniform(0, 1, (3, size, size))
    k = 5
    kernel = np.ones(k) / k
    for axis in (1, 2):
        noise = np.apply_along_axis(
            lambda row: np.convolve(row, kernel, mode="same"), axis, noise
        )
    noise = (noise - noise.min()) / max(np.ptp(noise), 1e-6)
    tint = rng.uniform(0.3, 1.0, 3)
    return (noise * tint[:, None, None]).astype(REAL)


def _shapes_image(rng, size):
    img = np.tile(rng.uniform(0, 1, 3).astype(REAL)[:, None, None], (1, size, size))
    for _ in range(int(rng.integers(3, 7))):
        color = rng.uniform(0, 1, 3).astype(REAL)
        if rng.uniform() < 0.5:
            y0, x0 = rng.integers(0, size, 2)
            hgt, wdt = rng.integers(size // 8, size // 2, 2)
            img[:, y0 : min(size, y0 + hgt), x0 : min(size, x0 + wdt)] = color[:, None, None]
        else:
            cy, cx = rng.integers(0, size, 2)
            r = int(rng.integers(size // 10, size // 3))
            yy, xx = np.ogrid[:size, :size]
            mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
            img[:, mask] = color[:, None]
    return img


_GENERATORS = (_gradient_image, _checkerboard_image, _filtered_noise_image, _shapes_image)


def procedural_corpus(count, size=64, seed=0):
    """Seeded synthetic training images: gradients, checkerboards,
    filtered noise and composited shapes, cycled in that order."""
    if size % arch.SPATIAL_MULTIPLE:
        raise InputError(f"size must be divisible by {arch.SPATIAL_MULTIPLE}")
    ss = np.random.SeedSequence(seed)
    images = []
    for i, child in enumerate(ss.spawn(count)):
        rng = np.random.default_rng(child)
        img = _GENERATORS[i % len(_GENERATORS)](rng, size)
        images.append(np.clip(img, 0.0, 1.0).astype(REAL))
    return Corpus(images=images, source="procedural")


def validation_pairs(count, size=64, seed=100):
    """Seeded (content, style) image pairs; styles carry strong color casts
    so a transfer visibly changes statistics."""
    ss = np.random.SeedSequence(seed)
    pairs = []
    for i, child in enumerate(ss.spawn(count)):
        rng = np.random.default_rng(child)
        content = _GENERATORS[i % len(_GENERATORS)](rng, size)
        style = _GENERATORS[(i + 2) % len(_GENERATORS)](rng, size)
        cast = rng.uniform(0.2, 1.0, 3).astype(REAL)
        style = np.clip(style * cast[:, None, None] + rng.uniform(0, 0.3), 0.0, 1.0)
        pairs.append((np.clip(content, 0, 1).astype(REAL), style.astype(REAL)))
    return pairs


@dataclass
class AdamState:
    m: dict
    v: dict
    step: int = 0


def _adam_init(params):
    return AdamState(
        m={k: np.zeros_like(a) for k, a in params.items()},
        v={k: np.zeros_like(a) for k, a in params.items()},
    )


def _adam_update(state, params, grads, config):
    state.step += 1
    t = state.step
    lr = config.learning_rate
    b1, b2 = config.beta1, config.beta2
    correction = math.sqrt(1.0 - b2**t) / (1.0 - b1**t)
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= (lr * correction) * m / (np.sqrt(v) + config.adam_eps)


@dataclass
class TrainResult:
    graph: object
    loss_trace: list = field(default_factory=list)


def train_decoder(graph, corpus, config):
    """Minimize pixel MSE of reconstruction; returns the trained graph and
    the per-step loss trace. Deterministic given the config seed."""
    taps_cache = [graph.encoder.encode(img) for img in corpus.images]
    return train_decoder_cached(graph, corpus, taps_cache, config)


def train_decoder_cached(graph, corpus, taps_cache, config):
    """train_decoder with precomputed encoder taps (the encoder is fixed,
    so search loops share one cache across every candidate)."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    params = graph.params
    adam = _adam_init(params)
    trace = []

    for step in range(config.steps):
        picks = rng.integers(0, len(corpus), config.batch)
        grads = {k: np.zeros_like(a) for k, a in params.items()}
        loss = 0.0
        for idx in picks:
            taps = taps_cache[idx]
            target = corpus.images[idx]
            vals = arch.run_decoder(graph, taps, trace=True)
            out = vals[graph.out_node]  # pre-clamp output keeps the loss smooth
            diff = out - target
            loss += float(np.mean(diff.astype(np.float64) ** 2))
            grad_out = (2.0 / (diff.size * config.batch)) * diff
            g = arch.decoder_backward(graph, vals, grad_out.astype(REAL))
            for k in grads:
                grads[k] += g[k]
        loss /= config.batch
        if not math.isfinite(loss):
            raise TrainingDivergedError(step)
        trace.append(loss)
        _adam_update(adam, params, grads, config)

    return TrainResult(graph=graph, loss_trace=trace)


def psnr(result, reference, cap_db=PSNR_CAP_DB):
    mse = float(np.mean((result.astype(np.float64) - reference.astype(np.float64)) ** 2))
    if mse <= 0.0:
        return cap_db
    return min(cap_db, 10.0 * math.log10(1.0 / mse))


def reconstruction_psnr(graph, corpus):
    """Mean PSNR (dB) of transfer-free reconstruction over a corpus."""
    values = [psnr(arch.reconstruct(graph, img), img) for img in corpus.images]
    return float(np.mean(values))
