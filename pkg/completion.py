"""
Completion Module

Block constructions around the completion problem: given diagonal blocks
A1 and A2, choose the off-diagonal block X >= 0 (or X > 0) of

    A = [[A1, X], [X^T, A2]]

to make the SNT-rank of A small. Provides the Schur-type extension, the
rank-one glue (two variants), the inertia lower bound and a heuristic fit
over the free block.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag

from constructions import direct_sum
from matcore import (
    InvariantError,
    RankError,
    ShapeError,
    SntError,
    SymMatrix,
    Trifactor,
    as_array,
    inertia,
    numerical_rank,
    perron,
    verify_trifactorization,
)
from search import FitOptions, Objective, run_restarts


logger = logging.getLogger(__name__)

STRICT_EPS_FRACTION = 1e-3


def _verified(A: np.ndarray, F: Trifactor, tol: float, what: str) -> None:
    report = verify_trifactorization(A, F, tol * max(1.0, float(np.abs(A).max())))
    if not report.valid:
        raise InvariantError(f"{what} does not verify (residual {report.max_residual:.3g})")


@dataclass(frozen=True, eq=False)
class GlueInput:
    """
    Factor of A1_hat = [[A1, a], [a^T, alpha]] (its last row is the glue row)
    and a factor of A2 whose Perron pair is (alpha, u).
    """

    A1_hat_factor: Trifactor
    A2_factor: Trifactor
    u: np.ndarray
    alpha: float

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float).ravel()
        if u.shape[0] != self.A2_factor.n:
            raise ShapeError(f"u has length {u.shape[0]}, A2 is {self.A2_factor.n}x{self.A2_factor.n}")
        if abs(float(u @ u) - 1.0) > 1e-8 or u.min() < -1e-12:
            raise InvariantError("u must be a unit nonnegative vector")
        corner = float(self.A1_hat_factor.product()[-1, -1])
        if abs(corner - self.alpha) > 1e-9 * max(1.0, abs(self.alpha)):
            raise InvariantError(
                f"bottom-right entry of A1_hat ({corner:.12g}) must equal alpha ({self.alpha:.12g})"
            )
        A2 = self.A2_factor.product()
        if np.max(np.abs(A2 @ u - self.alpha * u)) > 1e-8 * max(1.0, abs(self.alpha)):
            raise InvariantError("u is not an eigenvector of A2 for alpha")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def from_factors(cls, A1_hat_factor: Trifactor, A2_factor: Trifactor) -> "GlueInput":
        """Take (alpha, u) as the Perron pair of A2."""
        alpha, u = perron(A2_factor.product())
        return cls(A1_hat_factor, A2_factor, u, alpha)

    @property
    def b1(self) -> np.ndarray:
        return self.A1_hat_factor.B[-1]

    @property
    def B1(self) -> np.ndarray:
        return self.A1_hat_factor.B[:-1]

    @property
    def A1_hat(self) -> np.ndarray:
        return self.A1_hat_factor.product()


@dataclass(frozen=True, eq=False)
class CompletionFit:
    X: np.ndarray
    F: Trifactor
    rel_residual: float
    success: bool
    k: int
    epsilon: float = 0.0

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "success": self.success,
            "rel_residual": self.rel_residual,
            "epsilon": self.epsilon,
            "X": self.X.tolist(),
        }


def schur_completion(
    A1, A0, N, F1: Trifactor, F0: Optional[Trifactor] = None
) -> Tuple[SymMatrix, Trifactor]:
    """
    A = [[A1, A1 N], [N^T A1, A0 + N^T A1 N]] with factor
    ([[B1, 0], [N^T B1, B0]], C1 (+) C0); rk(A) = rk(A1) + rk(A0).

    When A0 = 0 and no F0 is given the zero block is dropped and k = k1.
    """
    a1 = as_array(A1)
    a0 = as_array(A0)
    N = np.atleast_2d(np.asarray(N, dtype=float))
    n, m = N.shape
    if a1.shape != (n, n) or a0.shape != (m, m):
        raise ShapeError(f"N is {n}x{m} but A1 is {a1.shape} and A0 is {a0.shape}")
    if N.min() < 0:
        raise InvariantError("N must be nonnegative")
    if F1.n != n:
        raise ShapeError(f"F1 has {F1.n} rows, A1 is {n}x{n}")
    _verified(a1, F1, 1e-9, "F1")

    A = np.block([[a1, a1 @ N], [N.T @ a1, a0 + N.T @ a1 @ N]])
    lower = N.T @ F1.B
    if F0 is None:
        if np.any(a0):
            raise InvariantError("a factor of A0 is required unless A0 = 0")
        F = Trifactor(np.vstack([F1.B, lower]), F1.C)
    else:
        if F0.n != m:
            raise ShapeError(f"F0 has {F0.n} rows, A0 is {m}x{m}")
        _verified(a0, F0, 1e-9, "F0")
        B = np.block([[F1.B, np.zeros((n, F0.k))], [lower, F0.B]])
        F = Trifactor(B, block_diag(F1.C, F0.C))

    result = SymMatrix(A)
    _verified(result.entries, F, 1e-9, "Schur completion factor")
    return result, F


def rank1_glue(g: GlueInput) -> Tuple[SymMatrix, Trifactor]:
    """
    A = [[A1, a u^T], [u a^T, A2]] with B = B1 (+) B2 and
    C = [[C1, C12], [C12^T, C2]], C12 = (1/alpha) C1 b1 u^T B2 C2.

    Raises:
        InvariantError: alpha <= 0, or rank(A) != rank(A1_hat) + rank(A2) - 1.
    """
    if g.alpha <= 0:
        raise InvariantError("glue needs a positive Perron value")
    F1, F2 = g.A1_hat_factor, g.A2_factor
    B1, b1 = g.B1, g.b1
    C12 = np.outer(F1.C @ b1, g.u @ F2.B @ F2.C) / g.alpha

    B = block_diag(B1, F2.B)
    C = np.block([[F1.C, C12], [C12.T, F2.C]])
    F = Trifactor(B, C)

    A1_hat = g.A1_hat
    A1 = A1_hat[:-1, :-1]
    a = A1_hat[:-1, -1]
    A2 = F2.product()
    A = SymMatrix(np.block([[A1, np.outer(a, g.u)], [np.outer(g.u, a), A2]]))
    _verified(A.entries, F, 1e-8, "glued factor")

    expected = numerical_rank(A1_hat) + numerical_rank(A2) - 1
    got = numerical_rank(A)
    if got != expected:
        raise InvariantError(f"glued rank {got} differs from rank(A1_hat) + rank(A2) - 1 = {expected}")
    return A, F


def rank1_glue_rank1(g: GlueInput) -> Tuple[SymMatrix, Trifactor]:
    """
    Glue when A2 = alpha u u^T: B = [[B1], [u b1^T]], C = C1, so the inner
    dimension stays k1.

    Raises:
        RankError: A2 is not alpha u u^T.
    """
    A2 = g.A2_factor.product()
    if np.max(np.abs(A2 - g.alpha * np.outer(g.u, g.u))) > 1e-9 * max(1.0, abs(g.alpha)):
        raise RankError("A2 is not the rank-one matrix alpha u u^T")
    F1 = g.A1_hat_factor
    F = Trifactor(np.vstack([g.B1, np.outer(g.u, g.b1)]), F1.C)

    A1_hat = g.A1_hat
    a = A1_hat[:-1, -1]
    A = SymMatrix(np.block([[A1_hat[:-1, :-1], np.outer(a, g.u)], [np.outer(g.u, a), A2]]))
    _verified(A.entries, F, 1e-9, "rank-one glued factor")
    return A, F


def completion_lower_bound(A1, A2) -> int:
    """max(pi_1, pi_2) + max(nu_1, nu_2) from the two inertias."""
    in1, in2 = inertia(A1), inertia(A2)
    return max(in1.pi_plus, in2.pi_plus) + max(in1.pi_minus, in2.pi_minus)


def completion_upper_bound(F1: Trifactor, F2: Trifactor) -> Tuple[int, Trifactor]:
    """k1 + k2 through X = 0, the direct sum of the block factors."""
    F = direct_sum(F1, F2)
    return F.k, F


def _peel_factor(P: np.ndarray, Q: np.ndarray, i: int) -> Optional[Trifactor]:
    """
    Schur extension of P by N = sqrt(Q_ii / lambda) u e_i^T, where (lambda, u)
    is the Perron pair of P. Row i of Q must be zero off the diagonal, so
    A0 = Q - N^T P N has a zero row and the factor has k = n_P + n_Q - 1.
    Rows come out in the order (P, Q).
    """
    try:
        lam, u = perron(P)
    except SntError:
        return None
    if lam <= 0 or P.min() < 0 or Q.min() < 0:
        return None
    m = Q.shape[0]
    N = np.zeros((P.shape[0], m))
    N[:, i] = np.sqrt(Q[i, i] / lam) * u
    A0 = Q.copy()
    A0[i, i] = 0.0
    if m == 1:
        _, F = schur_completion(P, A0, N, Trifactor.identity(P))
        return F
    rest = [j for j in range(m) if j != i]
    F0 = Trifactor(np.eye(m)[:, rest], A0[np.ix_(rest, rest)])
    _, F = schur_completion(P, A0, N, Trifactor.identity(P), F0)
    return F


def completion_seeds(A1, A2) -> List[Trifactor]:
    """
    Exact factors of completions of (A1, A2) with k = n1 + n2 - 1, one below
    the trivial direct sum, built by peeling a diagonal-only row of one block
    into the Perron direction of the other. Their X is zero outside one row
    or column.
    """
    a1, a2 = as_array(A1), as_array(A2)
    seeds: List[Trifactor] = []
    for P, Q, flip in ((a1, a2, False), (a2, a1, True)):
        for i in range(Q.shape[0]):
            off = np.delete(Q[i], i)
            if Q[i, i] <= 0 or np.any(off != 0):
                continue
            F = _peel_factor(P, Q, i)
            if F is None:
                continue
            if flip:
                F = Trifactor(np.vstack([F.B[P.shape[0]:], F.B[:P.shape[0]]]), F.C)
            seeds.append(F)
            logger.debug("completion seed: row %d of block %d peeled, k=%d", i, 1 if flip else 2, F.k)
            break
    return seeds


def fit_completion(
    A1,
    A2,
    k: int,
    strict_positive_X: bool = False,
    opts: Optional[FitOptions] = None,
    seeds: Sequence[Trifactor] = (),
    schur_seeds: bool = True,
) -> CompletionFit:
    """
    Fit B C B^T at inner dimension k to the diagonal blocks only; the
    off-diagonal block X is whatever the factor produces.

    With ``strict_positive_X`` a hinge penalty max(0, eps - X_ij)^2 pushes X
    above eps = 1e-3 * (largest block entry), and success also needs X to
    clear eps up to the residual tolerance.

    Without the strict flag the ``completion_seeds`` factors are tried after
    the caller's seeds (``schur_seeds=False`` turns that off).
    """
    opts = opts or FitOptions()
    a1, a2 = as_array(A1), as_array(A2)
    n1, n2 = a1.shape[0], a2.shape[0]
    target = block_diag(a1, a2)
    weights = block_diag(np.ones((n1, n1)), np.ones((n2, n2)))
    eps = 0.0
    obj = Objective(target, weights)
    if strict_positive_X:
        eps = STRICT_EPS_FRACTION * max(float(a1.max()), float(a2.max()), 1e-300)
        obj = Objective(target, weights, slice(0, n1), slice(n1, n1 + n2), eps)

    starts = list(seeds)
    if schur_seeds and not strict_positive_X:
        starts += completion_seeds(a1, a2)
    result = run_restarts(obj, k, opts, starts)
    X = result.F.product()[:n1, n1:]
    success = result.rel_residual <= opts.tol_residual
    if strict_positive_X:
        success = success and float(X.min()) >= eps - opts.tol_residual * obj.scale()
    logger.info("completion fit k=%d strict=%s rel_residual=%.3g success=%s",
                k, strict_positive_X, result.rel_residual, success)
    return CompletionFit(X, result.F, result.rel_residual, success, k, eps)
