"""
Constructions Module

Closed-form SN-Trifactorization builders:
- block operations (direct sum, sum, power, principal submatrix)
- factors obtained from nonnegative factorizations UV^T
- separable and rank-2 factorizations
- the Euclidean distance matrix factor with about n/2 columns
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import block_diag
from scipy.optimize import nnls

from matcore import (
    InvariantError,
    NotSeparableError,
    RankError,
    ShapeError,
    SymMatrix,
    Trifactor,
    as_array,
    jacobi_eigh,
    numerical_rank,
)


logger = logging.getLogger(__name__)

SEPARABLE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class NmfPair:
    """Nonnegative pair (U, V) standing for M = U V^T."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = np.atleast_2d(np.array(self.U, dtype=float))
        V = np.atleast_2d(np.array(self.V, dtype=float))
        if U.shape[1] != V.shape[1]:
            raise ShapeError(f"U has {U.shape[1]} columns, V has {V.shape[1]}")
        if U.min() < 0 or V.min() < 0:
            raise InvariantError("NMF pair must be entrywise nonnegative")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def k(self) -> int:
        return self.U.shape[1]

    def product(self) -> np.ndarray:
        return self.U @ self.V.T


def _swap_identity(k: int) -> np.ndarray:
    I = np.eye(k)
    Z = np.zeros((k, k))
    return np.block([[Z, I], [I, Z]])


# ── Block operations ─────────────────────────────────────────────────────────


def direct_sum(F1: Trifactor, F2: Trifactor) -> Trifactor:
    """Factor of A1 (+) A2 with k = k1 + k2."""
    return Trifactor(block_diag(F1.B, F2.B), block_diag(F1.C, F2.C))


def sum_factor(F1: Trifactor, F2: Trifactor) -> Trifactor:
    """Factor of A1 + A2: B = (B1 B2), C = C1 (+) C2."""
    if F1.n != F2.n:
        raise ShapeError(f"cannot add factors with {F1.n} and {F2.n} rows")
    return Trifactor(np.hstack([F1.B, F2.B]), block_diag(F1.C, F2.C))


def power_factor(F: Trifactor, m: int) -> Trifactor:
    """Factor of A^m with the same B and C' = (C B^T B)^(m-1) C."""
    if m < 1:
        raise InvariantError(f"power must be a positive integer, got {m}")
    inner = np.linalg.matrix_power(F.C @ F.B.T @ F.B, m - 1)
    return Trifactor(F.B, inner @ F.C)


def principal_subfactor(F: Trifactor, rows: Sequence[int]) -> Trifactor:
    """Restrict B to ``rows`` (0-based); the product is A[rows, rows]."""
    rows = list(rows)
    if not rows:
        raise ShapeError("principal submatrix needs at least one row")
    if min(rows) < 0 or max(rows) >= F.n:
        raise ShapeError(f"row indices {rows} out of range for n={F.n}")
    return Trifactor(F.B[rows], F.C)


# ── Factors from nonnegative factorizations ─────────────────────────────────


def bipartite_factor(pair: NmfPair) -> Trifactor:
    """
    Factor of the bipartite matrix [[0, X], [X^T, 0]] with X = U V^T.

    B = [[U, 0], [0, V]] and C swaps the two identity blocks, so k = 2 k(U).
    """
    Z_u = np.zeros_like(pair.U)
    Z_v = np.zeros_like(pair.V)
    B = np.block([[pair.U, Z_u], [Z_v, pair.V]])
    return Trifactor(B, _swap_identity(pair.k))


def symmetrization_factor(pair: NmfPair) -> Trifactor:
    """Factor of M + M^T for M = U V^T: B = (U V), C = [[0, I], [I, 0]]."""
    if pair.U.shape[0] != pair.V.shape[0]:
        raise ShapeError("U and V must have the same number of rows")
    return Trifactor(np.hstack([pair.U, pair.V]), _swap_identity(pair.k))


# ── Separable and rank-2 factors ────────────────────────────────────────────


def _nnls_residual(basis: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, float]:
    if basis.shape[1] == 0:
        return np.zeros(0), float(np.linalg.norm(target))
    coef, res = nnls(basis, target)
    return coef, float(res)


def _greedy_columns(a: np.ndarray, tol: float) -> List[int]:
    chosen: List[int] = []
    for j in range(a.shape[1]):
        _, res = _nnls_residual(a[:, chosen], a[:, j])
        if res > tol:
            chosen.append(j)
    # Drop columns the rest of the set already generates.
    for j in list(chosen):
        rest = [c for c in chosen if c != j]
        _, res = _nnls_residual(a[:, rest], a[:, j])
        if rest and res <= tol:
            chosen = rest
    return chosen


def separable_factor(
    A, cols: Optional[Sequence[int]] = None, tol: float = SEPARABLE_TOL
) -> Trifactor:
    """
    Factor A = B C B^T from a set of columns that nonnegatively generates
    every column of A: C = A[cols, cols], B^T = Q with A = A[:, cols] Q.

    Args:
        A: symmetric nonnegative matrix
        cols: 0-based column indices; when omitted, the first generating
            set found greedily in index order is used
        tol: residual tolerance, relative to max(1, ||A||_F)

    Raises:
        NotSeparableError: some column is not generated (reports the worst).
    """
    a = as_array(A)
    n = a.shape[0]
    scaled_tol = tol * max(1.0, float(np.linalg.norm(a)))
    if cols is None:
        cols = _greedy_columns(a, scaled_tol)
        logger.debug("greedy separable set: %s", cols)
    cols = list(cols)
    if not cols or min(cols) < 0 or max(cols) >= n or len(set(cols)) != len(cols):
        raise ShapeError(f"invalid column set {cols} for n={n}")

    basis = a[:, cols]
    Q = np.zeros((len(cols), n))
    worst_col, worst_res = -1, 0.0
    for j in range(n):
        coef, res = _nnls_residual(basis, a[:, j])
        Q[:, j] = coef
        if res > worst_res:
            worst_col, worst_res = j, res
    if worst_res > scaled_tol:
        raise NotSeparableError(
            f"column {worst_col} is not a nonnegative combination of columns {cols} "
            f"(residual {worst_res:.3g})",
            worst_column=worst_col,
            residual=worst_res,
        )
    Q[:, cols] = np.eye(len(cols))
    return Trifactor(Q.T, a[np.ix_(cols, cols)])


def rank2_factor(A) -> Trifactor:
    """
    k = 2 factorization of a rank-2 symmetric nonnegative matrix.

    Columns are mapped to coordinates in the rank-2 eigenbasis; the two
    columns spanning the extreme rays of the planar cone they generate
    (angular order around the column sum, ties to the smaller index) form
    the separable set.

    Raises:
        RankError: numerical rank is not 2.
    """
    a = as_array(A)
    r = numerical_rank(A)
    if r != 2:
        raise RankError(f"rank-2 factorization requested for a rank-{r} matrix")

    w, V = jacobi_eigh(a)
    top = np.argsort(-np.abs(w), kind="stable")[:2]
    coords = V[:, top].T @ a
    norms = np.linalg.norm(coords, axis=0)
    live = np.flatnonzero(norms > 1e-12 * norms.max())
    ref = coords[:, live].sum(axis=1)
    angles = np.arctan2(
        ref[0] * coords[1, live] - ref[1] * coords[0, live],
        ref @ coords[:, live],
    )
    p = int(live[np.argmin(angles)])
    q = int(live[np.argmax(angles)])
    cols = sorted((p, q))

    Q, *_ = np.linalg.lstsq(a[:, cols], a, rcond=None)
    Q = np.maximum(Q, 0.0)
    Q[:, cols] = np.eye(2)
    return Trifactor(Q.T, a[np.ix_(cols, cols)])


# ── Euclidean distance matrices ─────────────────────────────────────────────


def edm_matrix(n: int) -> SymMatrix:
    """M_n with entries (i - j)^2."""
    idx = np.arange(n, dtype=float)
    return SymMatrix((idx[:, None] - idx[None, :]) ** 2)


def edm_factor(n: int) -> Tuple[SymMatrix, Trifactor]:
    """
    Factor of M_n (n even) with k = n/2 + 2.

    With h = n/2, v = (1, 3, ..., n-1) and K the h x h reversal matrix:
    B = [[K v, 0, I], [0, v, K]] and C = [[0, 1, 0], [1, 0, 0], [0, 0, M_h]].
    """
    if n < 2 or n % 2:
        raise InvariantError(f"edm_factor needs an even n >= 2, got {n}")
    h = n // 2
    v = np.arange(1, n, 2, dtype=float)
    K = np.eye(h)[::-1]
    zeros = np.zeros((h, 1))
    B = np.block([
        [(K @ v)[:, None], zeros, np.eye(h)],
        [zeros, v[:, None], K],
    ])
    C = block_diag(np.array([[0.0, 1.0], [1.0, 0.0]]), edm_matrix(h).entries)
    return edm_matrix(n), Trifactor(B, C)


def edm_factor_any(n: int) -> Tuple[SymMatrix, Trifactor]:
    """M_n for any n >= 1; odd n goes through the leading block of M_(n+1)."""
    if n < 1:
        raise InvariantError(f"n must be positive, got {n}")
    if n % 2 == 0:
        return edm_factor(n)
    _, F = edm_factor(n + 1)
    return edm_matrix(n), principal_subfactor(F, range(n))
