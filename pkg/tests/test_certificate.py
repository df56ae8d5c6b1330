import numpy as np
import pytest

from certificate import (
    MOVABLE_WORDING,
    NOT_CERTIFIED_WORDING,
    CertificateProblem,
    boundary_certificate,
    check_movable,
    gordan_direction,
    movability_verdict,
)
from conftest import random_factor
from matcore import InvariantError, ShapeError, apply_scaling, permute_scale_target
from worked_examples import s_root, shift_result


def test_problem_zero_sets():
    """Z(B) and Z(C) are relative to each factor; W cells are upper-triangular."""
    B = np.array([[1.0, 0.0], [1e-12, 2.0]])
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    problem = CertificateProblem(B, C)
    assert problem.x_cells() == [(0, 1), (1, 0)]
    assert problem.w_cells() == [(0, 0), (1, 1)]
    with pytest.raises(InvariantError):
        CertificateProblem(B, [[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(ShapeError):
        CertificateProblem(B, np.eye(3))


def test_positive_factors_are_movable():
    """Strictly positive B or C settles movability without solving anything."""
    verdict = movability_verdict(np.ones((3, 2)), [[0.0, 1.0], [1.0, 0.0]])
    assert verdict.movable
    assert verdict.reason == "B is strictly positive"
    assert verdict.wording == MOVABLE_WORDING
    assert check_movable(np.eye(2), np.ones((2, 2)))


def test_first_similarity_factor_has_no_certificate():
    """Only the zero solution exists for B(2, S1), C(12, 2, S1)."""
    F = shift_result("S1").F
    assert boundary_certificate(F.B, F.C) is None
    verdict = movability_verdict(F.B, F.C)
    assert verdict.movable
    assert verdict.certificate is None
    Y = gordan_direction(F.B, F.C)
    assert Y is not None
    problem = CertificateProblem(F.B, F.C)
    moved_B = -(F.B @ Y)
    moved_C = Y @ F.C + F.C @ Y.T
    assert all(moved_B[i, j] > 0 for i, j in problem.x_cells())
    assert all(moved_C[i, j] > 0 for i, j in problem.w_cells())


def test_third_similarity_factor_certificate():
    """Nonzero (X, W) with the expected support and ratios."""
    s = s_root()
    F = shift_result("S3").F
    cert = boundary_certificate(F.B, F.C)
    assert cert is not None
    assert cert.norm == pytest.approx(1.0)
    assert cert.residual(F.B, F.C) < 1e-9
    assert cert.x_support() == [(0, 0), (1, 2), (2, 0), (3, 1)]

    X, W, C3 = cert.X, cert.W, F.C
    np.testing.assert_allclose(W, np.diag(np.diag(W)), atol=1e-9)
    w33 = W[2, 2]
    assert X[0, 0] / w33 == pytest.approx(np.sqrt(2) * C3[0, 1] / (3 + s), abs=1e-6)
    assert X[1, 2] / w33 == pytest.approx(np.sqrt(2) * C3[1, 2] / (1 - s), abs=1e-6)
    assert X[2, 0] == pytest.approx(X[0, 0], abs=1e-9)
    assert X[3, 1] == pytest.approx(X[1, 2], abs=1e-9)
    assert W[0, 0] / w33 == pytest.approx(2 * C3[1, 2] / (C3[0, 1] * (1 - s)), abs=1e-6)
    assert W[1, 1] == pytest.approx(w33, abs=1e-9)

    verdict = movability_verdict(F.B, F.C)
    assert not verdict.movable
    assert verdict.wording == NOT_CERTIFIED_WORDING
    assert verdict.to_dict()["certificate"]["X"] == X.tolist()
    assert gordan_direction(F.B, F.C) is None


def test_duality_agrees_with_highs(rng):
    """Exactly one of the boundary system and the Gordan system is solvable."""
    for _ in range(100):
        n, r = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        F = random_factor(rng, n, r, density=0.6)
        if not F.B.any() or not F.C.any():
            continue
        cert = boundary_certificate(F.B, F.C)
        Y = gordan_direction(F.B, F.C)
        assert (cert is None) == (Y is not None)
        if cert is not None:
            assert cert.residual(F.B, F.C) < 1e-7


def test_certificate_existence_survives_scaling(rng):
    """Column scaling of the factor or row scaling of the target keeps the verdict."""
    factors = [shift_result("S1").F, shift_result("S3").F]
    factors += [random_factor(rng, 4, 3, density=0.6) for _ in range(10)]
    for F in factors:
        if not F.B.any() or not F.C.any():
            continue
        expected = boundary_certificate(F.B, F.C) is None
        for _ in range(5):
            G = apply_scaling(F, rng.permutation(F.k), rng.uniform(0.5, 2.0, size=F.k))
            assert (boundary_certificate(G.B, G.C) is None) == expected
            _, H = permute_scale_target(F.product(), F, rng.permutation(F.n), rng.uniform(0.5, 2.0, size=F.n))
            assert (boundary_certificate(H.B, H.C) is None) == expected
