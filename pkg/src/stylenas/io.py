"""Bit-exact file formats: the versioned weights container and P6 PPM images.

Weights layout (all integers little-endian):
    magic "PNWT" | version u32 | tensor count u32
    per tensor: name length u32, UTF-8 name, dtype u8 (0 = float32),
                rank u8, dims u32 * rank, payload float32 row-major

PPM is the mandatory image format (P6, maxval 255); pixel values map
linearly to [0, 1].
"""

import struct

import numpy as np

from .errors import ImageFormatError, InputError, WeightsFormatError
from .tensor import REAL

WEIGHTS_MAGIC = b"PNWT"
WEIGHTS_VERSION = 1
DTYPE_F32 = 0


def save_weights(tensors, path):
    """Write a name->array map; values are stored as float32."""
    blob = bytearray()
    blob += WEIGHTS_MAGIC
    blob += struct.pack("<I", WEIGHTS_VERSION)
    blob += struct.pack("<I", len(tensors))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype=REAL)
        encoded = name.encode("utf-8")
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<BB", DTYPE_F32, arr.ndim)
        for dim in arr.shape:
            blob += struct.pack("<I", dim)
        blob += arr.astype("<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


class _Reader:
    def __init__(self, data):
        self.data = data
        self.offset = 0

    def take(self, n, what):
        if self.offset + n > len(self.data):
            raise WeightsFormatError(f"truncated file while reading {what}", offset=self.offset)
        chunk = self.data[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def u32(self, what):
        return struct.unpack("<I", self.take(4, what))[0]

    def u8(self, what):
        return self.take(1, what)[0]


def load_weights(path):
    """Read a weights file back into an ordered name->float32-array map."""
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    if r.take(4, "magic") != WEIGHTS_MAGIC:
        raise WeightsFormatError("bad magic, not a weights file", offset=0)
    version = r.u32("version")
    if version != WEIGHTS_VERSION:
        raise WeightsFormatError(f"unsupported format version {version}", offset=4)
    count = r.u32("tensor count")
    tensors = {}
    for _ in range(count):
        name_offset = r.offset
        name_len = r.u32("name length")
        name = r.take(name_len, "name").decode("utf-8")
        if name in tensors:
            raise WeightsFormatError(f"duplicate tensor name {name!r}", offset=name_offset)
        dtype_offset = r.offset
        dtype = r.u8("dtype")
        if dtype != DTYPE_F32:
            raise WeightsFormatError(f"unsupported dtype code {dtype}", offset=dtype_offset)
        rank = r.u8("rank")
        dims = tuple(r.u32("dims") for _ in range(rank))
        n_values = 1
        for d in dims:
            n_values *= d
        payload = r.take(4 * n_values, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(REAL)
    return tensors


def save_graph_weights(graph, path):
    save_weights(graph.all_params(), path)


def load_graph_weights(graph, path):
    """Install a weights file into a built graph, validating names/shapes."""
    tensors = load_weights(path)
    expected = graph.all_params()
    missing = sorted(set(expected) - set(tensors))
    if missing:
        raise InputError(f"weights file is missing tensors: {', '.join(missing)}")
    extra = sorted(set(tensors) - set(expected))
    if extra:
        raise InputError(
            f"weights file has tensors the architecture does not use: {', '.join(extra)}"
        )
    for name, arr in expected.items():
        if tensors[name].shape != arr.shape:
            raise InputError(
                f"tensor {name} has shape {tuple(tensors[name].shape)}, "
                f"expected {tuple(arr.shape)}"
            )
    for name, arr in expected.items():
        arr[...] = tensors[name]
    return graph


# --- PPM ----------------------------------------------------------------------


def _next_token(data, pos):
    while pos < len(data):
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ImageFormatError("unexpected end of PPM header")
    return data[start:pos], pos


def read_ppm(path):
    """Read a P6 maxval-255 PPM into an RGB (3, H, W) float32 array in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _next_token(data, 0)
    if magic != b"P6":
        raise ImageFormatError(f"unsupported PPM magic {magic!r}, only binary P6 is supported")
    width_tok, pos = _next_token(data, pos)
    height_tok, pos = _next_token(data, pos)
    maxval_tok, pos = _next_token(data, pos)
    try:
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except ValueError:
        raise ImageFormatError("malformed PPM header") from None
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}")
    pos += 1  # single whitespace after maxval
    expected = width * height * 3
    raw = data[pos : pos + expected]
    if len(raw) != expected:
        raise ImageFormatError(
            f"PPM payload has {len(raw)} bytes, expected {expected}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return np.ascontiguousarray(pixels.transpose(2, 0, 1).astype(REAL) / 255.0)


def write_ppm(image, path):
    """Write an RGB (3, H, W) array in [0, 1] as a P6 maxval-255 PPM."""
    img = np.asarray(image)
    if img.ndim != 3 or img.shape[0] != 3:
        raise InputError(f"expected an RGB (3, H, W) image, got shape {img.shape}")
    quantized = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    header = f"P6\n{img.shape[2]} {img.shape[1]}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quantized.transpose(1, 2, 0).tobytes())
