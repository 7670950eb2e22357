"""Kernel backend selection.

The hot kernels (3x3 convolution forward/backward, cyclic Jacobi
eigensolver) exist twice: a Cython extension (``_core``) and a NumPy
implementation (``npy``). Dispatch follows measurement, not ideology:
the eigensolver comes from the extension when available (10-100x faster
than the Python rotation loop), while the convolution always goes through
the BLAS-backed im2col path, which beats the direct C loops at every
production shape (see benchmarks/bench_kernels.py for the numbers).

``STYLENAS_BACKEND=numpy`` forces pure NumPy; ``=compiled`` makes a
missing extension an error instead of a silent fallback.
"""

import os

from . import npy as _npy

_requested = os.environ.get("STYLENAS_BACKEND", "auto")

if _requested not in ("auto", "compiled", "numpy"):
    raise ValueError(f"STYLENAS_BACKEND must be auto, compiled or numpy, got {_requested!r}")

if _requested == "numpy":
    _core = None
else:
    try:
        from . import _core
    except ImportError:
        if _requested == "compiled":
            raise
        _core = None

BACKEND = "compiled" if _core is not None else "numpy"
jacobi_eigh = _core.jacobi_eigh if _core is not None else _npy.jacobi_eigh
conv3x3_forward = _npy.conv3x3_forward
conv3x3_backward = _npy.conv3x3_backward


def load_backend(name):
    """Return a specific backend module (for benchmarks and tests)."""
    if name == "numpy":
        return _npy
    if name == "compiled":
        import importlib

        return importlib.import_module(f"{__name__}._core")
    raise ValueError(f"unknown backend {name!r}")
