"""Checkpoint-to-PNWT conversion with an auditable report.

Checkpoints load from NumPy archives (.npz) or torch state dicts
(.pt/.pth, torch imported lazily). All validation happens before any
output: on error no file (not even a partial one) is written.
"""

import os
import tempfile
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pnwt
from .manifest import ManifestError


class ConversionError(ValueError):
    pass


@dataclass(frozen=True)
class TensorReport:
    name: str
    shape: tuple
    checksum: int  # crc32 of the little-endian float32 payload


@dataclass
class ConversionReport:
    out_path: str
    base_width: int
    tensors: list


def payload_checksum(arr):
    return zlib.crc32(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path):
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".npz":
        with np.load(path) as archive:
            return {name: np.asarray(archive[name]) for name in archive.files}
    if suffix in (".pt", ".pth"):
        import torch

        state = torch.load(path, map_location="cpu", weights_only=True)
        if hasattr(state, "state_dict"):
            state = state.state_dict()
        if not isinstance(state, dict):
            raise ConversionError(f"checkpoint {path} does not contain a tensor dict")
        return {name: tensor.detach().cpu().numpy() for name, tensor in state.items()}
    raise ConversionError(f"unsupported checkpoint format {suffix!r} (use .npz, .pt or .pth)")


def convert(checkpoint_path, manifest, out_path):
    """Export the manifest's layers from a checkpoint into a PNWT file.

    Refuses to write on any missing layer, shape mismatch or non-numeric
    dtype; returns a report with one checksum per exported tensor.
    """
    checkpoint = load_checkpoint(checkpoint_path)

    exported = {}
    reports = []
    for entry in manifest.entries:
        if entry.source not in checkpoint:
            raise ConversionError(
                f"checkpoint is missing layer {entry.source!r} (mapped to {entry.target!r})"
            )
        arr = np.asarray(checkpoint[entry.source])
        if not np.issubdtype(arr.dtype, np.floating):
            raise ConversionError(
                f"layer {entry.source!r} has unsupported dtype {arr.dtype}, expected floating"
            )
        if tuple(arr.shape) != entry.shape:
            raise ConversionError(
                f"layer {entry.source!r} has shape {tuple(arr.shape)}, "
                f"manifest expects {entry.shape} for {entry.target!r}"
            )
        arr32 = arr.astype("<f4")
        exported[entry.target] = arr32
        reports.append(
            TensorReport(name=entry.target, shape=tuple(arr32.shape),
                         checksum=payload_checksum(arr32))
        )

    out_path = Path(out_path)
    fd, tmp_name = tempfile.mkstemp(dir=out_path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            pnwt.dump(exported, fh)
        os.replace(tmp_name, out_path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise

    return ConversionReport(out_path=str(out_path), base_width=manifest.base_width,
                            tensors=reports)


def verify_written_file(report):
    """Recompute every checksum from the written file; returns mismatches."""
    tensors = pnwt.load(report.out_path)
    problems = []
    for entry in report.tensors:
        if entry.name not in tensors:
            problems.append(f"{entry.name}: missing from file")
            continue
        actual = payload_checksum(tensors[entry.name])
        if actual != entry.checksum:
            problems.append(f"{entry.name}: checksum {actual} != reported {entry.checksum}")
    return problems
