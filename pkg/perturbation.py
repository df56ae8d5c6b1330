"""
Perturbation Module

Perron perturbation of a symmetric nonnegative matrix A of rank r: for an
invertible r x r matrix S whose first column and first inverse row are
positive,

    B(beta, S)        = U (beta (+) I) S^-1
    C(alpha, beta, S) = S (1/beta (+) I) (lambda1 + alpha (+) D1) (1/beta (+) I) S^T

give A + alpha u u^T = B C B^T with k = r once beta and alpha are large
enough. This module computes the smallest such beta and alpha in closed
form, searches over S, and recovers S (as T) from a given factorization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from matcore import (
    InvariantError,
    RankError,
    ShapeError,
    SpectralData,
    SymMatrix,
    Trifactor,
    as_array,
    perron,
    spectral_split,
    verify_trifactorization,
)


logger = logging.getLogger(__name__)

NEG_TOL = 1e-12
MAX_CONDITION = 1e8


@dataclass(frozen=True, eq=False)
class PerronSimilarity:
    """Invertible S with positive first column and positive first row of S^-1."""

    S: np.ndarray
    S_inv: np.ndarray

    def __post_init__(self):
        S = np.atleast_2d(np.array(self.S, dtype=float))
        S_inv = np.atleast_2d(np.array(self.S_inv, dtype=float))
        if S.shape[0] != S.shape[1] or S.shape != S_inv.shape:
            raise ShapeError(f"similarity must be square, got S{S.shape}, S_inv{S_inv.shape}")
        if np.max(np.abs(S @ S_inv - np.eye(S.shape[0]))) >= 1e-8:
            raise InvariantError("S_inv is not the inverse of S")
        if S[:, 0].min() <= 1e-12:
            raise InvariantError("first column of S must be positive")
        if S_inv[0].min() <= 1e-12:
            raise InvariantError("first row of S^-1 must be positive")
        S.setflags(write=False)
        S_inv.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "S_inv", S_inv)

    @classmethod
    def from_matrix(cls, S) -> "PerronSimilarity":
        S = np.atleast_2d(np.array(S, dtype=float))
        try:
            S_inv = np.linalg.inv(S)
        except np.linalg.LinAlgError as exc:
            raise InvariantError("similarity matrix is singular") from exc
        return cls(S, S_inv)

    @classmethod
    def from_inverse(cls, S_inv) -> "PerronSimilarity":
        S_inv = np.atleast_2d(np.array(S_inv, dtype=float))
        try:
            S = np.linalg.inv(S_inv)
        except np.linalg.LinAlgError as exc:
            raise InvariantError("similarity matrix is singular") from exc
        return cls(S, S_inv)

    @property
    def r(self) -> int:
        return self.S.shape[0]

    @property
    def first_col(self) -> np.ndarray:
        return self.S[:, 0]

    @property
    def first_row_inv(self) -> np.ndarray:
        return self.S_inv[0]


@dataclass(frozen=True, eq=False)
class PerturbResult:
    alpha: float
    beta: float
    F: Trifactor
    A_perturbed: SymMatrix

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "k": self.F.k,
            "B": self.F.B.tolist(),
            "C": self.F.C.tolist(),
        }


@dataclass(frozen=True, eq=False)
class SimilarityReport:
    """T recovered from a factorization: B = U T^-1, C = T (lambda1 (+) D1) T^T."""

    T: np.ndarray
    T_inv: np.ndarray
    b_residual: float
    c_residual: float
    first_col_nonneg: bool
    first_row_inv_nonneg: bool


@dataclass(frozen=True, eq=False)
class OptimizeResult:
    similarity: PerronSimilarity
    alpha: float
    beta: float
    evaluations: int


def _check_orders(sd: SpectralData, S: PerronSimilarity) -> None:
    if S.r != sd.r:
        raise ShapeError(f"similarity is {S.r}x{S.r} but the rank is {sd.r}")


# ── Closed forms ─────────────────────────────────────────────────────────────


def b_factor(sd: SpectralData, S: PerronSimilarity, beta: float) -> np.ndarray:
    """B(beta, S) = beta u s^1 + U1 S^-1[1:, :], s^1 the first row of S^-1."""
    _check_orders(sd, S)
    return beta * np.outer(sd.u, S.first_row_inv) + sd.U1 @ S.S_inv[1:, :]


def c_factor(sd: SpectralData, S: PerronSimilarity, alpha: float, beta: float) -> np.ndarray:
    """C(alpha, beta, S) = ((lambda1 + alpha) / beta^2) s1 s1^T + S1 diag(D1) S1^T."""
    _check_orders(sd, S)
    s1 = S.first_col
    S1 = S.S[:, 1:]
    C = ((sd.lambda1 + alpha) / beta ** 2) * np.outer(s1, s1) + (S1 * sd.D1) @ S1.T
    return 0.5 * (C + C.T)


def min_beta(sd: SpectralData, S: PerronSimilarity) -> float:
    """
    Smallest beta >= 0 with B(beta, S) >= -1e-12 entrywise.

    Entries are affine in beta with slope u_i s^1_j > 0, so each negative
    entry of the beta-free part fixes a lower bound.
    """
    _check_orders(sd, S)
    R = sd.U1 @ S.S_inv[1:, :]
    slope = np.outer(sd.u, S.first_row_inv)
    neg = R < -NEG_TOL
    if not neg.any():
        return 0.0
    if np.any(slope[neg] <= 0):
        raise InvariantError("Perron vector vanishes where B(beta, S) needs lifting")
    return float(max(0.0, np.max(-R[neg] / slope[neg])))


def min_alpha(sd: SpectralData, S: PerronSimilarity, beta: float) -> float:
    """Smallest alpha >= 0 with C(alpha, beta, S) >= -1e-12 entrywise."""
    _check_orders(sd, S)
    if beta <= 0:
        raise InvariantError(f"beta must be positive, got {beta}")
    s1 = S.first_col
    S1 = S.S[:, 1:]
    M = (S1 * sd.D1) @ S1.T
    bound = -sd.lambda1 - beta ** 2 * M / np.outer(s1, s1)
    return float(max(0.0, bound.max()))


def _working_beta(beta_min: float) -> float:
    """
    The minimal beta, or 1 when it is 0.

    For r >= 2 every column of U1 S^-1[1:, :] is orthogonal to the positive
    Perron vector, so it has a negative entry unless it vanishes. A zero
    minimum therefore only comes from entries within NEG_TOL of zero; every
    beta > 0 is then feasible and beta = 1 keeps C(alpha, beta, S) unscaled.
    min_alpha is still taken at that beta, so alpha = 0 whenever C allows it.
    """
    return beta_min if beta_min > 0 else 1.0


def perturb_factorization(
    A,
    S: PerronSimilarity,
    spectral: Optional[SpectralData] = None,
    beta: Optional[float] = None,
    margin: float = 0.0,
) -> PerturbResult:
    """
    Factor A + alpha u u^T at inner dimension rank(A) with minimal beta and
    then minimal alpha for the given similarity.

    Args:
        A: irreducible symmetric nonnegative matrix
        S: Perron similarity of order rank(A)
        spectral: spectral split to use (fixes the U1 basis S refers to)
        beta: explicit beta, at least the minimal one
        margin: added to beta and alpha for strictly positive factors

    Raises:
        ShapeError: S has the wrong order
        InvariantError: beta below the minimum, or the factor fails to verify
    """
    a = as_array(A)
    sd = spectral if spectral is not None else spectral_split(A)

    if sd.r == 1:
        F = Trifactor(sd.u[:, None], [[sd.lambda1]])
        return PerturbResult(0.0, 1.0, F, SymMatrix(a))

    b_min = min_beta(sd, S)
    if beta is None:
        beta = _working_beta(b_min) + margin
    elif beta < b_min - NEG_TOL or beta <= 0:
        raise InvariantError(f"beta={beta} is below the minimum {b_min}")
    alpha = min_alpha(sd, S, beta) + margin

    F = Trifactor(b_factor(sd, S, beta), c_factor(sd, S, alpha, beta))
    target = SymMatrix(a + alpha * np.outer(sd.u, sd.u))
    report = verify_trifactorization(target, F, 1e-9 * max(1.0, float(np.abs(target.entries).max())))
    if not report.valid:
        raise InvariantError(f"perturbed factor does not verify (residual {report.max_residual:.3g})")
    logger.debug("perturbation beta=%.12g alpha=%.12g", beta, alpha)
    return PerturbResult(alpha, float(beta), F, target)


def shift_factor(F: Trifactor, beta: float, spectral: Optional[Tuple[float, np.ndarray]] = None):
    """
    Factor-level perturbation: (B + beta u u^T B) C (...)^T = A + alpha u u^T
    with alpha = (2 beta + beta^2) lambda1. The inner dimension is unchanged.

    Returns:
        (factor, alpha)
    """
    if beta < 0:
        raise InvariantError("beta must be nonnegative")
    lam1, u = spectral if spectral is not None else perron(F.product())
    B = F.B + beta * np.outer(u, u @ F.B)
    return Trifactor(B, F.C), (2.0 * beta + beta ** 2) * lam1


# ── Search over S ────────────────────────────────────────────────────────────


def orthogonal_completion(q1: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random orthogonal matrix whose first column is the unit vector q1."""
    r = q1.shape[0]
    Q, R = np.linalg.qr(np.column_stack([q1, rng.standard_normal((r, r - 1))]))
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q


def _alpha_for(sd: SpectralData, S: np.ndarray) -> Tuple[float, float]:
    try:
        sim = PerronSimilarity.from_matrix(S)
    except InvariantError:
        return float("inf"), float("nan")
    if np.linalg.cond(sim.S) > MAX_CONDITION:
        return float("inf"), float("nan")
    try:
        beta = _working_beta(min_beta(sd, sim))
    except InvariantError:
        return float("inf"), float("nan")
    return min_alpha(sd, sim, beta), beta


def optimize_S(
    A,
    budget: int,
    seed: int = 0,
    initial: Iterable = (),
    spectral: Optional[SpectralData] = None,
) -> OptimizeResult:
    """
    Randomized search for a similarity with small alpha.

    A quarter of the budget goes to random orthogonal completions of a
    positive unit first column (half of them the uniform vector), each drawn
    from its own stream seeded by (seed, candidate index). The best start,
    including any ``initial`` matrices, is refined with Nelder-Mead over the
    entries of S; invalid or badly conditioned candidates score +inf. The
    result never scores worse than its best start.
    """
    if budget < 1:
        raise InvariantError("budget must be at least 1")
    sd = spectral if spectral is not None else spectral_split(A)
    r = sd.r
    if r == 1:
        sim = PerronSimilarity(np.ones((1, 1)), np.ones((1, 1)))
        return OptimizeResult(sim, 0.0, 1.0, 0)

    starts = [np.array(s.S if isinstance(s, PerronSimilarity) else s, dtype=float) for s in initial]
    n_random = max(1, budget // 4)
    for idx in range(n_random):
        rng = np.random.default_rng([seed, idx])
        if idx % 2 == 0:
            q1 = np.ones(r) / np.sqrt(r)
        else:
            q1 = rng.uniform(0.1, 1.0, r)
            q1 /= np.linalg.norm(q1)
        starts.append(orthogonal_completion(q1, rng))

    scored = [(_alpha_for(sd, S)[0], i) for i, S in enumerate(starts)]
    best_alpha, best_idx = min(scored)
    best_S = starts[best_idx]
    evaluations = len(starts)
    logger.info("best start alpha=%.6g of %d candidates", best_alpha, len(starts))

    remaining = budget - evaluations
    if np.isfinite(best_alpha) and remaining > 0 and best_alpha > 0:
        res = minimize(
            lambda x: _alpha_for(sd, x.reshape(r, r))[0],
            best_S.ravel(),
            method="Nelder-Mead",
            options={"maxfev": remaining, "xatol": 1e-10, "fatol": 1e-12},
        )
        evaluations += int(res.nfev)
        if res.fun < best_alpha:
            best_alpha, best_S = float(res.fun), res.x.reshape(r, r)

    if not np.isfinite(best_alpha):
        raise RankError("no admissible similarity found within the budget")
    sim = PerronSimilarity.from_matrix(best_S)
    _, beta = _alpha_for(sd, best_S)
    return OptimizeResult(sim, float(best_alpha), float(beta), evaluations)


# ── Recovering T ─────────────────────────────────────────────────────────────


def extract_similarity(sd: SpectralData, F: Trifactor) -> SimilarityReport:
    """
    Recover T with B = U T^-1 and C = T (lambda1 (+) D1) T^T from a rank-size
    factorization of the matrix ``sd`` describes.

    Raises:
        ShapeError: F.k differs from the rank
        InvariantError: B is not in the column space of U
        RankError: U^T B is singular
    """
    if F.k != sd.r:
        raise ShapeError(f"factor has k={F.k}, rank is {sd.r}")
    U = sd.U
    T_inv = U.T @ F.B
    b_residual = float(np.max(np.abs(F.B - U @ T_inv)))
    if b_residual > 1e-6 * max(1.0, float(np.abs(F.B).max())):
        raise InvariantError(f"B is not in the column space of U (residual {b_residual:.3g})")
    try:
        T = np.linalg.inv(T_inv)
    except np.linalg.LinAlgError as exc:
        raise RankError("U^T B is singular") from exc

    c_residual = float(np.max(np.abs(F.C - (T * sd.eigenvalues) @ T.T)))
    tol_t = 1e-9 * max(1.0, float(np.abs(T).max()))
    tol_ti = 1e-9 * max(1.0, float(np.abs(T_inv).max()))
    report = SimilarityReport(
        T=T,
        T_inv=T_inv,
        b_residual=b_residual,
        c_residual=c_residual,
        first_col_nonneg=bool(T[:, 0].min() >= -tol_t),
        first_row_inv_nonneg=bool(T_inv[0].min() >= -tol_ti),
    )
    if not (report.first_col_nonneg and report.first_row_inv_nonneg):
        logger.warning("recovered T has sign violations; the rank is probably misjudged")
    return report
