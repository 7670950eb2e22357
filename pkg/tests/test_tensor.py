import numpy as np
import pytest

from stylenas.errors import DimensionError, PreconditionError
from stylenas.tensor import matmul, snap_spectrum, sym_eig

from oracles import matmul_loops


def test_matmul_identity():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 3)).astype(np.float32)
    assert np.array_equal(matmul(np.eye(3, dtype=np.float32), a), a)


def test_matmul_permutation():
    a = np.array([[1, 2], [3, 4]], dtype=np.float32)
    p = np.array([[0, 1], [1, 0]], dtype=np.float32)
    assert np.array_equal(matmul(a, p), np.array([[2, 1], [4, 3]], dtype=np.float32))


def test_matmul_matches_loop_oracle():
    rng = np.random.default_rng(2)
    a = rng.uniform(-1, 1, (5, 7)).astype(np.float32)
    b = rng.uniform(-1, 1, (7, 3)).astype(np.float32)
    assert np.abs(matmul(a, b) - matmul_loops(a, b)).max() < 1e-6


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        matmul(np.zeros((2, 3), np.float32), np.zeros((4, 2), np.float32))


def test_matmul_associative_within_tolerance():
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b, c = (rng.uniform(-1, 1, (8, 8)).astype(np.float32) for _ in range(3))
        lhs = matmul(matmul(a, b), c)
        rhs = matmul(a, matmul(b, c))
        assert np.abs(lhs - rhs).max() < 1e-4


def test_sym_eig_diagonal():
    e = sym_eig(np.diag([3.0, 1.0]))
    assert np.allclose(e.eigenvalues, [3.0, 1.0])
    assert np.allclose(e.eigenvectors, np.eye(2))
    assert e.converged


def test_sym_eig_classic_2x2():
    e = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    assert np.allclose(e.eigenvalues, [3.0, 1.0], atol=1e-6)


def test_sym_eig_reconstructs_random_spd():
    rng = np.random.default_rng(4)
    for trial in range(5):
        b = rng.standard_normal((8, 8))
        a = b @ b.T
        e = sym_eig(a)
        assert e.converged
        assert np.abs(e.reconstruct() - a).max() < 1e-4
        assert np.abs(e.eigenvectors.T @ e.eigenvectors - np.eye(8)).max() < 1e-5
        assert (np.diff(e.eigenvalues) <= 1e-5).all()
        assert (e.eigenvalues >= -1e-6).all()


def test_sym_eig_sign_convention_is_deterministic():
    rng = np.random.default_rng(5)
    b = rng.standard_normal((6, 6))
    a = b @ b.T
    e1, e2 = sym_eig(a), sym_eig(a)
    assert np.array_equal(e1.eigenvectors, e2.eigenvectors)
    for col in e1.eigenvectors.T:
        assert col[np.abs(col).argmax()] > 0


def test_sym_eig_rejects_non_symmetric():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(PreconditionError):
        sym_eig(a)


def test_sym_eig_rejects_non_square():
    with pytest.raises(DimensionError):
        sym_eig(np.zeros((2, 3)))


def test_sym_eig_sweep_budget_not_an_error():
    rng = np.random.default_rng(6)
    b = rng.standard_normal((12, 12))
    a = b @ b.T
    e = sym_eig(a, max_sweeps=1)
    assert not e.converged
    assert e.sweeps == 1


def test_sym_eig_zero_matrix_converges_immediately():
    e = sym_eig(np.zeros((4, 4)))
    assert e.converged
    assert np.allclose(e.eigenvalues, 0.0)


def test_sym_eig_idempotent_reconstruction_cycle():
    rng = np.random.default_rng(7)
    b = rng.standard_normal((6, 6))
    a = (b @ b.T).astype(np.float32)
    first = sym_eig(a).reconstruct()
    second = sym_eig((first + first.T) / 2).reconstruct()
    assert np.abs(second - first).max() < 1e-4


def test_snap_spectrum_clamps_tiny_negatives():
    vals = snap_spectrum(np.array([2.0, 1e-8, -1e-8, -1e-3]))
    assert vals[1] == 1e-8
    assert vals[2] == 0.0
    assert vals[3] == -1e-3
