"""Reader/writer for the engine's PNWT weights container.

This is an independent implementation of the documented format (the file
format, not the engine's code, is the contract between the two packages):

    magic "PNWT" | version u32 LE | tensor count u32 LE
    per tensor: name length u32, UTF-8 name, dtype u8 (0 = float32),
                rank u8, dims u32 LE * rank, payload float32 LE row-major
"""

import struct

import numpy as np

MAGIC = b"PNWT"
VERSION = 1
DTYPE_F32 = 0


class FormatError(ValueError):
    pass


def dump(tensors, fh):
    fh.write(MAGIC)
    fh.write(struct.pack("<I", VERSION))
    fh.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f4")
        encoded = name.encode("utf-8")
        fh.write(struct.pack("<I", len(encoded)))
        fh.write(encoded)
        fh.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
        for dim in arr.shape:
            fh.write(struct.pack("<I", dim))
        fh.write(arr.tobytes())


def load(path):
    with open(path, "rb") as fh:
        data = fh.read()
    pos = 0

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise FormatError(f"truncated file while reading {what} at offset {pos}")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(4, "magic") != MAGIC:
        raise FormatError("bad magic, not a PNWT file")
    version = struct.unpack("<I", take(4, "version"))[0]
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    count = struct.unpack("<I", take(4, "count"))[0]
    tensors = {}
    for _ in range(count):
        name_len = struct.unpack("<I", take(4, "name length"))[0]
        name = take(name_len, "name").decode("utf-8")
        if name in tensors:
            raise FormatError(f"duplicate tensor name {name!r}")
        dtype, rank = struct.unpack("<BB", take(2, "dtype/rank"))
        if dtype != DTYPE_F32:
            raise FormatError(f"unsupported dtype code {dtype}")
        dims = tuple(struct.unpack("<I", take(4, "dims"))[0] for _ in range(rank))
        n = int(np.prod(dims, dtype=np.int64)) if dims else 1
        payload = take(4 * n, f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).copy()
    return tensors
