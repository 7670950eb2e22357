"""Dense tensor helpers and the symmetric eigendecomposition.

Feature maps and images are plain float32 ndarrays, channels-first:
(C, H, W) for maps, (N, C, H, W) for batches. Forward/backward math runs
in 32-bit; the eigensolver works in 64-bit internally and rounds its
results to 32-bit, since near-rank-deficient covariances are the one
numerically fragile spot.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError, PreconditionError

REAL = np.float32

# eigenvalues in (-EIG_SNAP, 0) are round-off on PSD covariances and snap to 0
EIG_SNAP = 1e-6


def as_tensor(data, rank=None):
    """Coerce to a float32 array, optionally checking the rank.

    float64 input is preserved: the engine stores and computes in float32,
    but every op is dtype-generic so gradient verification can run the
    same code in double precision.
    """
    arr = np.asarray(data)
    if arr.dtype != np.float64:
        arr = arr.astype(REAL, copy=False)
    arr = np.ascontiguousarray(arr)
    if rank is not None and arr.ndim != rank:
        raise DimensionError(f"expected rank {rank}, got rank {arr.ndim}")
    return arr


def assert_finite(arr, what="tensor"):
    if not np.isfinite(arr).all():
        raise PreconditionError(f"{what} contains non-finite values")


def matmul(a, b):
    """Matrix product of two rank-2 tensors."""
    a = as_tensor(a, rank=2)
    b = as_tensor(b, rank=2)
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    return a @ b


@dataclass
class SymEig:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` are descending; ``eigenvectors`` holds one orthonormal
    eigenvector per column, sign-fixed so the largest-magnitude component
    of each column is positive. ``converged`` is False when the sweep
    budget ran out before the off-diagonal norm dropped below tolerance.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    converged: bool
    sweeps: int

    def reconstruct(self):
        e = self.eigenvectors.astype(np.float64)
        return (e * self.eigenvalues.astype(np.float64)) @ e.T


def sym_eig(a, max_sweeps=64):
    """Diagonalize a symmetric matrix with cyclic Jacobi rotations.

    Sweeps run until the off-diagonal Frobenius norm falls below
    1e-10 * ||a||_F or ``max_sweeps`` is exhausted (reported through
    ``converged``, not an error).
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if max_sweeps < 1:
        raise PreconditionError("max_sweeps must be >= 1")
    if a.size and np.abs(a - a.T).max() > 1e-6:
        raise PreconditionError("matrix is not symmetric within 1e-6")

    vals, vecs, converged, sweeps = _kernels.jacobi_eigh(a, max_sweeps)

    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    # deterministic sign: largest-magnitude component of each column positive
    pivot = np.abs(vecs).argmax(axis=0)
    signs = np.sign(vecs[pivot, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    vecs = vecs * signs

    result = SymEig(
        eigenvalues=vals.astype(REAL),
        eigenvectors=np.ascontiguousarray(vecs, dtype=REAL),
        converged=converged,
        sweeps=sweeps,
    )
    assert_finite(result.eigenvalues, "eigenvalues")
    assert_finite(result.eigenvectors, "eigenvectors")
    return result


def snap_spectrum(eigenvalues):
    """Clamp tiny negative eigenvalues (round-off on PSD inputs) to zero."""
    vals = np.array(eigenvalues, dtype=np.float64)
    vals[(vals > -EIG_SNAP) & (vals < 0.0)] = 0.0
    return vals
