"""
Certificate Module

Boundary test for a factorization A = B C B^T. The homogeneous system

    X >= 0, W = W^T >= 0, X o B = 0, W o C = 0, W C = B^T X

has only the zero solution exactly when the factors can be moved locally to
strictly positive ones, so A lies off the boundary. A nonzero solution is a
necessary condition for boundary membership, never a proof of it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import linprog

from matcore import InvariantError, ShapeError, Trifactor
from simplex import simplex_minimize


logger = logging.getLogger(__name__)

ZERO_SET_TOL = 1e-9
SYSTEM_TOL = 1e-7

MOVABLE_WORDING = (
    "movable: the factorization can be moved locally to strictly positive "
    "factors, so the matrix is not on the boundary"
)
NOT_CERTIFIED_WORDING = (
    "no movability certificate: a nonzero (X, W) exists; this is necessary "
    "for boundary membership but does not prove it"
)


@dataclass(frozen=True, eq=False)
class CertificateProblem:
    """Factor pair with its structural zero sets Z(B) and Z(C)."""

    B: np.ndarray
    C: np.ndarray
    tol: float = ZERO_SET_TOL
    ZB: np.ndarray = field(init=False, repr=False)
    ZC: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        B = np.atleast_2d(np.array(self.B, dtype=float))
        C = np.atleast_2d(np.array(self.C, dtype=float))
        if C.shape[0] != C.shape[1] or B.shape[1] != C.shape[0]:
            raise ShapeError(f"incompatible factor shapes B{B.shape}, C{C.shape}")
        c_scale = max(float(np.abs(C).max()), 1.0)
        if np.max(np.abs(C - C.T)) > 1e-10 * c_scale:
            raise InvariantError("certificate problem needs a symmetric C")
        if B.min() < -1e-10 * max(float(np.abs(B).max()), 1.0) or C.min() < -1e-10 * c_scale:
            raise InvariantError("certificate problem needs nonnegative factors")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", 0.5 * (C + C.T))
        object.__setattr__(self, "ZB", B <= self.tol * max(float(B.max()), 0.0))
        object.__setattr__(self, "ZC", self.C <= self.tol * max(float(self.C.max()), 0.0))

    @classmethod
    def from_factor(cls, F: Trifactor, tol: float = ZERO_SET_TOL) -> "CertificateProblem":
        return cls(F.B, F.C, tol)

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def r(self) -> int:
        return self.C.shape[0]

    def x_cells(self) -> List[Tuple[int, int]]:
        return [tuple(ij) for ij in np.argwhere(self.ZB)]

    def w_cells(self) -> List[Tuple[int, int]]:
        """Upper-triangle cells of Z(C); W is symmetric by construction."""
        return [(i, j) for i, j in np.argwhere(self.ZC) if i <= j]


@dataclass(frozen=True, eq=False)
class Certificate:
    """Nonzero solution (X, W) of the boundary system, scaled to unit sum."""

    X: np.ndarray
    W: np.ndarray

    @property
    def norm(self) -> float:
        return float(self.X.sum() + self.W.sum())

    def residual(self, B: np.ndarray, C: np.ndarray) -> float:
        return float(np.max(np.abs(self.W @ C - B.T @ self.X)))

    def x_support(self, tol: float = 1e-9) -> List[Tuple[int, int]]:
        return [tuple(map(int, ij)) for ij in np.argwhere(self.X > tol)]

    def to_dict(self) -> dict:
        return {"X": self.X.tolist(), "W": self.W.tolist()}


@dataclass(frozen=True)
class MovabilityVerdict:
    movable: bool
    reason: str
    certificate: Optional[Certificate]

    @property
    def wording(self) -> str:
        return MOVABLE_WORDING if self.movable else NOT_CERTIFIED_WORDING

    def to_dict(self) -> dict:
        return {
            "movable": self.movable,
            "reason": self.reason,
            "statement": self.wording,
            "certificate": self.certificate.to_dict() if self.certificate else None,
        }


def _assemble_system(problem: CertificateProblem):
    """Equality rows for W C - B^T X = 0 plus the unit-sum normalization."""
    B, C, r = problem.B, problem.C, problem.r
    x_cells = problem.x_cells()
    w_cells = problem.w_cells()
    nx = len(x_cells)
    A_eq = np.zeros((r * r + 1, nx + len(w_cells)))

    for v, (i, q) in enumerate(x_cells):
        # (B^T X)[p, q] picks up B[i, p] * X[i, q]
        for p in range(r):
            A_eq[p * r + q, v] -= B[i, p]
        A_eq[-1, v] = 1.0
    for v, (a, b) in enumerate(w_cells, start=nx):
        # (W C)[p, q] = sum_l W[p, l] C[l, q]; the variable sits at (a, b) and (b, a)
        for q in range(r):
            A_eq[a * r + q, v] += C[b, q]
            if a != b:
                A_eq[b * r + q, v] += C[a, q]
        A_eq[-1, v] = 1.0 if a == b else 2.0

    b_eq = np.zeros(r * r + 1)
    b_eq[-1] = 1.0
    return A_eq, b_eq, x_cells, w_cells


def boundary_certificate(B, C, tol: float = ZERO_SET_TOL) -> Optional[Certificate]:
    """
    Look for a nonzero (X, W) solving the boundary system.

    Returns:
        A Certificate normalized to sum(X) + sum(W) = 1, or None when only the
        zero solution exists.

    Raises:
        InvariantError: C is not symmetric or a factor has negative entries.
    """
    problem = CertificateProblem(B, C, tol)
    A_eq, b_eq, x_cells, w_cells = _assemble_system(problem)
    if A_eq.shape[1] == 0:
        return None

    result = simplex_minimize(np.zeros(A_eq.shape[1]), A_eq=A_eq, b_eq=b_eq)
    if not result.success:
        logger.debug("boundary system has only the zero solution (%s)", result.status)
        return None

    sol = np.where(result.x > 1e-12, result.x, 0.0)
    X = np.zeros_like(problem.B)
    W = np.zeros_like(problem.C)
    for v, (i, q) in enumerate(x_cells):
        X[i, q] = sol[v]
    for v, (a, b) in enumerate(w_cells, start=len(x_cells)):
        W[a, b] = W[b, a] = sol[v]
    cert = Certificate(X / (X.sum() + W.sum()), W / (X.sum() + W.sum()))

    res = cert.residual(problem.B, problem.C)
    if res > SYSTEM_TOL:
        logger.warning("certificate residual %.3g exceeds %.0e", res, SYSTEM_TOL)
    return cert


def check_movable(B, C) -> bool:
    """
    True when A = B C B^T is certified off the boundary: B > 0, C > 0, or the
    boundary system has only the zero solution. False only means that no
    certificate of movability was found.
    """
    return movability_verdict(B, C).movable


def movability_verdict(B, C, tol: float = ZERO_SET_TOL) -> MovabilityVerdict:
    problem = CertificateProblem(B, C, tol)
    if not problem.ZB.any():
        return MovabilityVerdict(True, "B is strictly positive", None)
    if not problem.ZC.any():
        return MovabilityVerdict(True, "C is strictly positive", None)
    cert = boundary_certificate(problem.B, problem.C, tol)
    if cert is None:
        return MovabilityVerdict(True, "boundary system has only the zero solution", None)
    return MovabilityVerdict(False, "nonzero solution of the boundary system", cert)


def gordan_direction(B, C, tol: float = ZERO_SET_TOL, margin_tol: float = 1e-7) -> Optional[np.ndarray]:
    """
    Solve the alternative system: a direction Y with -(B Y)_ij > 0 on Z(B)
    and (Y C + C Y^T)_ij > 0 on Z(C). Exactly one of this system and the
    boundary system has a solution.

    Solved with scipy's HiGHS by maximizing a margin t over |Y_ij| <= 1.

    Returns:
        Y (r x r) with a positive margin, or None.
    """
    problem = CertificateProblem(B, C, tol)
    Bm, Cm, r = problem.B, problem.C, problem.r
    rows = []
    for i, j in problem.x_cells():
        row = np.zeros(r * r + 1)
        row[-1] = 1.0
        for a in range(r):
            row[a * r + j] += Bm[i, a]
        rows.append(row)
    for i, j in problem.w_cells():
        row = np.zeros(r * r + 1)
        row[-1] = 1.0
        for b in range(r):
            row[i * r + b] -= Cm[b, j]
            row[j * r + b] -= Cm[i, b]
        rows.append(row)
    if not rows:
        return np.zeros((r, r))

    cost = np.zeros(r * r + 1)
    cost[-1] = -1.0
    bounds = [(-1.0, 1.0)] * (r * r) + [(0.0, 1.0)]
    res = linprog(cost, A_ub=np.array(rows), b_ub=np.zeros(len(rows)), bounds=bounds, method="highs")
    if res.status != 0 or res.x[-1] <= margin_tol:
        return None
    return res.x[:-1].reshape(r, r)
