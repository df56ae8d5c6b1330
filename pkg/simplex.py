"""
Dense two-phase simplex with Bland's anti-cycling rule.

Small, deterministic LP solver for the certificate feasibility systems:

    minimize    c^T x
    subject to  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np


logger = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray]
    objective: float
    iterations: int

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(T: np.ndarray, row: int, col: int) -> None:
    T[row] /= T[row, col]
    for i in range(T.shape[0]):
        if i != row and T[i, col] != 0.0:
            T[i] -= T[i, col] * T[row]


def _iterate(
    T: np.ndarray, basis: List[int], allowed: int, tol: float, max_iter: int
) -> Tuple[str, int]:
    """Bland's rule: lowest-index improving column, lowest-index leaving variable."""
    for it in range(max_iter):
        costs = T[-1, :allowed]
        improving = np.flatnonzero(costs < -tol)
        if improving.size == 0:
            return OPTIMAL, it
        entering = int(improving[0])
        column = T[:-1, entering]
        rows = np.flatnonzero(column > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, abs(best))]
        leaving = int(min(ties, key=lambda i: basis[i]))
        _pivot(T, leaving, entering)
        basis[leaving] = entering
    return ITERATION_LIMIT, max_iter


def simplex_minimize(
    c,
    A_eq=None,
    b_eq=None,
    A_ub=None,
    b_ub=None,
    tol: float = 1e-9,
    max_iter: int = 20000,
) -> LPResult:
    """
    Solve a small dense LP over x >= 0.

    Inequalities receive slack columns; every row then gets an artificial
    variable for phase one. Artificials left basic at level zero are pivoted
    out, or their row is dropped when it is redundant.
    """
    c = np.asarray(c, dtype=float)
    nvar = c.shape[0]
    blocks, rhs = [], []
    n_slack = 0
    if A_ub is not None and len(A_ub):
        A_ub = np.atleast_2d(np.asarray(A_ub, dtype=float))
        n_slack = A_ub.shape[0]
        blocks.append(np.hstack([A_ub, np.eye(n_slack)]))
        rhs.append(np.asarray(b_ub, dtype=float))
    if A_eq is not None and len(A_eq):
        A_eq = np.atleast_2d(np.asarray(A_eq, dtype=float))
        blocks.append(np.hstack([A_eq, np.zeros((A_eq.shape[0], n_slack))]))
        rhs.append(np.asarray(b_eq, dtype=float))
    if not blocks:
        return LPResult(OPTIMAL, np.zeros(nvar), 0.0, 0)

    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    m, ncols = A.shape

    # Phase one: minimize the sum of artificials.
    T = np.zeros((m + 1, ncols + m + 1))
    T[:m, :ncols] = A
    T[:m, ncols:ncols + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :ncols] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(ncols, ncols + m))

    status, it1 = _iterate(T, basis, ncols + m, tol, max_iter)
    infeasibility = -T[-1, -1]
    if status != OPTIMAL or infeasibility > tol * max(1.0, float(np.abs(b).max())):
        logger.debug("phase one ended %s with infeasibility %.3g", status, infeasibility)
        return LPResult(INFEASIBLE, None, float("nan"), it1)

    keep_rows = []
    for i in range(m):
        if basis[i] < ncols:
            keep_rows.append(i)
            continue
        candidates = np.flatnonzero(np.abs(T[i, :ncols]) > tol)
        if candidates.size:
            _pivot(T, i, int(candidates[0]))
            basis[i] = int(candidates[0])
            keep_rows.append(i)
    T = np.vstack([T[keep_rows][:, list(range(ncols)) + [-1]], np.zeros((1, ncols + 1))])
    basis = [basis[i] for i in keep_rows]

    # Phase two with the true costs.
    cost = np.concatenate([c, np.zeros(ncols - nvar)])
    T[-1, :ncols] = cost
    for i, var in enumerate(basis):
        T[-1] -= cost[var] * T[i]
    status, it2 = _iterate(T, basis, ncols, tol, max_iter)

    x = np.zeros(ncols)
    for i, var in enumerate(basis):
        x[var] = T[i, -1]
    x = np.maximum(x[:nvar], 0.0)
    if status != OPTIMAL:
        return LPResult(status, x, float("nan"), it1 + it2)
    return LPResult(OPTIMAL, x, float(c @ x), it1 + it2)
