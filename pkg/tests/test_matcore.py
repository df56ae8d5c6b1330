import numpy as np
import pytest

import matcore
from conftest import random_factor
from matcore import (
    Inertia,
    InvariantError,
    IrreducibilityError,
    ShapeError,
    SpectralData,
    SymMatrix,
    Trifactor,
    apply_scaling,
    inertia,
    is_irreducible,
    jacobi_eigh,
    numerical_rank,
    permute_scale_target,
    perron,
    spectral_split,
    support_pattern,
    verify_trifactorization,
)


def test_symmatrix_rejects_asymmetric_and_negative():
    """Asymmetry or negativity beyond the tolerance is an invariant error."""
    with pytest.raises(InvariantError):
        SymMatrix([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(InvariantError):
        SymMatrix([[0.0, -1.0], [-1.0, 0.0]])
    with pytest.raises(ShapeError):
        SymMatrix(np.ones((2, 3)))


def test_symmatrix_clamps_dust_and_is_read_only():
    """Rounding dust is symmetrized and clamped; entries cannot be written."""
    A = SymMatrix([[1.0, 2.0 + 1e-13], [2.0, -1e-14]])
    assert A.entries[0, 1] == A.entries[1, 0]
    assert A.entries[1, 1] == 0.0
    with pytest.raises(ValueError):
        A.entries[0, 0] = 5.0


def test_trifactor_shapes_and_vector_B():
    """A 1-D B is a single column; mismatched inner dimensions are rejected."""
    F = Trifactor([1.0, 2.0], 3.0)
    assert (F.n, F.k) == (2, 1)
    np.testing.assert_allclose(F.product(), 3.0 * np.outer([1, 2], [1, 2]))
    with pytest.raises(ShapeError):
        Trifactor(np.ones((3, 2)), np.eye(3))
    with pytest.raises(InvariantError):
        Trifactor(np.ones((2, 2)), [[1.0, -1.0], [-1.0, 1.0]])


def test_trifactor_non_strict_keeps_negative_entries():
    """strict=False keeps a negative C so verification can report it."""
    F = Trifactor(np.eye(2), [[1.0, -1.0], [-1.0, 1.0]], strict=False)
    report = verify_trifactorization(F.B @ F.C @ F.B.T, F)
    assert not report.valid
    assert not report.nonneg_ok
    assert report.max_residual == 0.0


def test_jacobi_matches_reconstruction(rng):
    """Jacobi returns ascending eigenvalues and an orthogonal basis."""
    for n in (1, 2, 5, 9):
        M = rng.standard_normal((n, n))
        M = M + M.T
        w, V = jacobi_eigh(M)
        assert np.all(np.diff(w) >= 0)
        np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-10)
        np.testing.assert_allclose((V * w) @ V.T, M, atol=1e-9)
        np.testing.assert_allclose(w, np.linalg.eigvalsh(M), atol=1e-9)


def test_jacobi_eigenpair_residuals(rng):
    """Every eigenpair satisfies ||A v - lambda v|| <= 1e-10 ||A||_F."""
    worst = 0.0
    for _ in range(200):
        W = rng.uniform(0.0, 1.0, size=(3, 2))
        A = W @ np.diag(rng.uniform(0.1, 2.0, size=2)) @ W.T
        w, V = jacobi_eigh(A)
        res = np.linalg.norm(A @ V - V * w, axis=0).max() / np.linalg.norm(A)
        worst = max(worst, res)
        assert numerical_rank(A) == 2
    assert worst <= 1e-10


def test_jacobi_handles_tiny_off_diagonal():
    """A rotation angle whose square overflows still gives finite output."""
    A = np.array([[1e100, 1e-60], [1e-60, -1e100]])
    w, V = jacobi_eigh(A, tol=0.0, max_sweeps=2)
    assert np.all(np.isfinite(w)) and np.all(np.isfinite(V))
    np.testing.assert_allclose(w, [-1e100, 1e100])
    np.testing.assert_allclose(np.abs(V), np.eye(2)[::-1], atol=1e-12)


def test_numerical_rank_examples(shift_matrix, obstruction_matrix):
    """Known ranks of small integer matrices."""
    cycle = np.array([[1, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 1]], dtype=float)
    assert numerical_rank(cycle) == 3
    assert numerical_rank(shift_matrix) == 3
    assert numerical_rank(obstruction_matrix) == 3
    assert numerical_rank(np.zeros((3, 3))) == 0
    assert numerical_rank(np.ones((4, 4))) == 1


def test_explicit_rank_tolerance_is_relative():
    """An explicit tol is scaled by max(1, |lambda|max)."""
    A = np.diag([100.0, 1e-3])
    assert numerical_rank(A) == 2
    assert numerical_rank(A, tol=1e-4) == 1


def test_inertia_of_shift_matrix(shift_matrix):
    """Eigenvalues 4, 0, -2, -2."""
    assert inertia(shift_matrix) == Inertia(1, 2, 1)
    assert inertia(SymMatrix(shift_matrix)).n == 4


def test_inertia_under_congruence(rng):
    """Positive and negative counts of B C B^T never exceed those of C."""
    for _ in range(50):
        n, k = rng.integers(2, 7), rng.integers(1, 6)
        F = random_factor(rng, n, k)
        inner, outer = inertia(F.C), inertia(F.product())
        assert outer.pi_plus <= inner.pi_plus
        assert outer.pi_minus <= inner.pi_minus


def test_rank_never_exceeds_inner_dimension(rng):
    """numerical_rank(B C B^T) <= k for every valid factorization."""
    for _ in range(100):
        n, k = int(rng.integers(2, 8)), int(rng.integers(1, 7))
        F = random_factor(rng, n, k, density=float(rng.uniform(0.3, 1.0)))
        assert numerical_rank(F.product()) <= F.k


def test_irreducibility():
    """Connected support graph."""
    assert is_irreducible(np.ones((3, 3)))
    assert is_irreducible([[0.0]])
    assert not is_irreducible(np.eye(2))
    assert not is_irreducible([[1, 1, 0], [1, 1, 0], [0, 0, 1]])


def test_support_pattern_threshold():
    A = [[1.0, 1e-13, 0.0], [1e-13, 0.0, 2.0], [0.0, 2.0, 3.0]]
    np.testing.assert_array_equal(
        support_pattern(A),
        [[True, True, False], [True, False, True], [False, True, True]],
    )
    assert not support_pattern(A, tol=1e-12)[0, 1]


def test_perron_pair(shift_matrix):
    """Uniform Perron vector of a regular matrix."""
    lam, u = perron(shift_matrix)
    assert lam == pytest.approx(4.0, abs=1e-12)
    np.testing.assert_allclose(u, np.full(4, 0.5), atol=1e-12)
    with pytest.raises(IrreducibilityError):
        perron(np.eye(3))


def test_spectral_split_reconstructs(shift_matrix):
    """U diag(eigenvalues) U^T equals A; zero eigenvalues are dropped."""
    sd = spectral_split(shift_matrix)
    assert sd.r == 3
    np.testing.assert_allclose(sd.D1, [-2.0, -2.0], atol=1e-12)
    np.testing.assert_allclose(sd.reconstruct(), shift_matrix, atol=1e-10)
    shifted = sd.shifted(12.0)
    np.testing.assert_allclose(shifted.reconstruct(), shift_matrix + 3.0, atol=1e-10)


def test_spectral_split_rejects_bad_reconstruction(monkeypatch, shift_matrix):
    """Eigenpairs that do not rebuild A raise instead of passing through."""
    exact = matcore.jacobi_eigh

    def skewed(a, *args, **kwargs):
        w, V = exact(a, *args, **kwargs)
        return 1.1 * w, V

    monkeypatch.setattr(matcore, "jacobi_eigh", skewed)
    with pytest.raises(InvariantError):
        spectral_split(np.array(shift_matrix))


def test_spectral_data_validates_orthogonality():
    """U1 must be orthogonal to u."""
    u = np.full(4, 0.5)
    with pytest.raises(InvariantError):
        SpectralData(4.0, u, np.array([1.0, 0, 0, 0]), [-2.0])
    with pytest.raises(ShapeError):
        SpectralData(4.0, u, np.zeros((4, 2)), [-2.0])
    sd = SpectralData(2.0, [1.0], [], [])
    assert sd.r == 1
    assert sd.U.shape == (1, 1)


def test_apply_scaling_preserves_product(rng):
    """(B P D, D^-1 P^T C P D^-1) has the same product."""
    for _ in range(100):
        n, k = rng.integers(2, 7), rng.integers(1, 6)
        F = random_factor(rng, n, k)
        perm = rng.permutation(k)
        d = rng.uniform(0.2, 5.0, size=k)
        G = apply_scaling(F, perm, d)
        scale = max(1.0, float(np.abs(F.product()).max()))
        assert np.max(np.abs(G.product() - F.product())) <= 1e-12 * scale * 10


def test_apply_scaling_rejects_bad_input(rng):
    """Non-permutations and nonpositive scalings are invariant errors."""
    F = random_factor(rng, 3, 2)
    with pytest.raises(InvariantError):
        apply_scaling(F, [0, 0], [1.0, 1.0])
    with pytest.raises(InvariantError):
        apply_scaling(F, [1, 0], [1.0, 0.0])


def test_permute_scale_target(rng):
    """(D P) A (D P)^T is factored by (D P B, C)."""
    F = random_factor(rng, 4, 3)
    A = F.product()
    perm = [2, 0, 3, 1]
    d = np.array([1.0, 2.0, 0.5, 3.0])
    target, G = permute_scale_target(A, F, perm, d)
    assert G.k == F.k
    assert verify_trifactorization(target, G, 1e-12 * max(1.0, float(target.entries.max()))).valid
    assert target.entries[0, 1] == pytest.approx(A[2, 0] * d[0] * d[1])


def test_verify_shape_mismatch():
    """B with the wrong number of rows is a shape error."""
    with pytest.raises(ShapeError):
        verify_trifactorization(np.eye(3), Trifactor(np.eye(2), np.eye(2)))


def test_to_dict_round_trips_through_arrays():
    """Trifactor.to_dict carries k and both factors."""
    F = Trifactor(np.eye(2), [[0.0, 1.0], [1.0, 0.0]])
    d = F.to_dict()
    assert d["k"] == 2
    np.testing.assert_array_equal(np.array(d["C"]), F.C)
