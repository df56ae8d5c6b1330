"""
Core Matrix Module

Types and primitives shared by every other module:
- SymMatrix / Trifactor containers with their nonnegativity invariants
- a cyclic Jacobi eigensolver, numerical rank and inertia
- the Perron pair and the spectral split used by the perturbation code
- support patterns and irreducibility
- factor rescaling and factorization verification
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Tuple, Union

import numpy as np


logger = logging.getLogger(__name__)


DEFAULT_SYM_TOL = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60
THETA_LARGE = 1e150
RANK_EPS = 1e-12


# ── Errors ───────────────────────────────────────────────────────────────────


class SntError(ValueError):
    """Base class for domain errors (bad shapes, broken invariants, ...)."""


class ShapeError(SntError):
    """Operands have incompatible dimensions."""


class InvariantError(SntError):
    """A type invariant or an operation precondition does not hold."""


class IrreducibilityError(SntError):
    """The support graph of the matrix is disconnected."""


class RankError(SntError):
    """The matrix does not have the rank an operation requires."""


class NotSeparableError(SntError):
    """The chosen columns do not nonnegatively generate the matrix."""

    def __init__(self, message: str, worst_column: int = -1, residual: float = float("nan")):
        super().__init__(message)
        self.worst_column = worst_column
        self.residual = residual


# ── Helpers ──────────────────────────────────────────────────────────────────


def _frozen(values, ndim: Optional[int] = None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


def _scale(arr: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0


def as_array(A: Union["SymMatrix", np.ndarray, Sequence]) -> np.ndarray:
    """Plain float array view of a SymMatrix or any array-like."""
    if isinstance(A, SymMatrix):
        return A.entries
    return np.asarray(A, dtype=float)


# ── Types ────────────────────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """
    Dense symmetric nonnegative matrix.

    Entries within ``sym_tol * max(1, max|a|)`` of symmetry are accepted and
    stored symmetrized; negative dust above ``-sym_tol`` (same scaling) is
    clamped to zero, anything more negative is rejected.
    """

    entries: np.ndarray
    sym_tol: float = DEFAULT_SYM_TOL

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise ShapeError(f"SymMatrix needs a nonempty square array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvariantError("SymMatrix entries must be finite")
        tol = self.sym_tol * _scale(a)
        asym = float(np.max(np.abs(a - a.T)))
        if asym > tol:
            raise InvariantError(f"matrix is not symmetric (max |a_ij - a_ji| = {asym:.3g})")
        if a.min() < -tol:
            raise InvariantError(f"matrix has a negative entry {a.min():.3g}")
        a = 0.5 * (a + a.T)
        a[a < 0] = 0.0
        object.__setattr__(self, "entries", _frozen(a))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    @cached_property
    def eigh(self) -> Tuple[np.ndarray, np.ndarray]:
        """Ascending eigenvalues and eigenvectors (Jacobi), computed once."""
        w, v = jacobi_eigh(self.entries)
        w.setflags(write=False)
        v.setflags(write=False)
        return w, v

    def shifted(self, alpha: float, u: np.ndarray) -> "SymMatrix":
        """Return A + alpha * u u^T."""
        u = np.asarray(u, dtype=float)
        return SymMatrix(self.entries + alpha * np.outer(u, u), self.sym_tol)

    @classmethod
    def from_factor(cls, F: "Trifactor") -> "SymMatrix":
        return cls(F.product())


@dataclass(frozen=True, eq=False)
class Trifactor:
    """
    The pair (B, C) standing for B C B^T.

    With ``strict`` (the default) the invariants B >= 0, C = C^T >= 0 are
    enforced: dust is clamped and C is stored symmetrized. ``strict=False``
    keeps the arrays as given so that verification can report on them.
    """

    B: np.ndarray
    C: np.ndarray
    strict: bool = field(default=True, repr=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        C = np.array(self.C, dtype=float)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if C.ndim == 0:
            C = C.reshape(1, 1)
        if B.ndim != 2 or C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ShapeError(f"bad factor shapes B{B.shape}, C{C.shape}")
        if B.shape[1] != C.shape[0] or C.shape[0] < 1 or B.shape[0] < 1:
            raise ShapeError(f"inner dimensions disagree: B{B.shape}, C{C.shape}")
        if self.strict:
            tol_b = DEFAULT_SYM_TOL * _scale(B)
            tol_c = DEFAULT_SYM_TOL * _scale(C)
            if B.min() < -tol_b:
                raise InvariantError(f"B has a negative entry {B.min():.3g}")
            if C.min() < -tol_c:
                raise InvariantError(f"C has a negative entry {C.min():.3g}")
            if np.max(np.abs(C - C.T)) > tol_c:
                raise InvariantError("C is not symmetric")
            B[B < 0] = 0.0
            C = 0.5 * (C + C.T)
            C[C < 0] = 0.0
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "C", _frozen(C))

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def k(self) -> int:
        return self.C.shape[0]

    def product(self) -> np.ndarray:
        P = self.B @ self.C @ self.B.T
        return 0.5 * (P + P.T)

    def to_dict(self) -> dict:
        return {"k": self.k, "B": self.B.tolist(), "C": self.C.tolist()}

    @classmethod
    def identity(cls, A: Union[SymMatrix, np.ndarray]) -> "Trifactor":
        """The trivial factorization A = I A I^T."""
        a = as_array(A)
        return cls(np.eye(a.shape[0]), a)


@dataclass(frozen=True)
class Inertia:
    """Counts of positive, negative and zero eigenvalues."""

    pi_plus: int
    pi_minus: int
    pi_zero: int

    def __post_init__(self):
        if min(self.pi_plus, self.pi_minus, self.pi_zero) < 0:
            raise InvariantError("inertia counts must be nonnegative")

    @property
    def n(self) -> int:
        return self.pi_plus + self.pi_minus + self.pi_zero

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.pi_plus, self.pi_minus, self.pi_zero)


@dataclass(frozen=True, eq=False)
class SpectralData:
    """
    Perron pair plus the remaining nonzero eigenpairs of a matrix.

    ``U1`` holds the non-Perron eigenvectors belonging to the nonzero
    eigenvalues ``D1``; ``r`` is the numerical rank.
    """

    lambda1: float
    u: np.ndarray
    U1: np.ndarray
    D1: np.ndarray

    def __post_init__(self):
        u = _frozen(self.u, ndim=1)
        U1 = np.array(self.U1, dtype=float)
        if U1.size == 0:
            U1 = np.zeros((u.shape[0], 0))
        elif U1.ndim == 1:
            U1 = U1.reshape(-1, 1)
        if U1.shape[0] != u.shape[0]:
            raise ShapeError(f"U1 has {U1.shape[0]} rows, expected {u.shape[0]}")
        D1 = _frozen(np.ravel(self.D1))
        if U1.shape[1] != D1.shape[0]:
            raise ShapeError(f"U1 has {U1.shape[1]} columns but D1 has {D1.shape[0]} values")
        if abs(float(u @ u) - 1.0) > 1e-10:
            raise InvariantError("Perron vector is not unit norm")
        if u.min() < -1e-12:
            raise InvariantError("Perron vector has a negative entry")
        if U1.shape[1]:
            if np.max(np.abs(U1.T @ u)) > 1e-8:
                raise InvariantError("U1 is not orthogonal to u")
            if np.max(np.abs(U1.T @ U1 - np.eye(U1.shape[1]))) > 1e-8:
                raise InvariantError("U1 columns are not orthonormal")
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "U1", _frozen(U1))
        object.__setattr__(self, "D1", D1)

    @property
    def r(self) -> int:
        return 1 + self.D1.shape[0]

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def U(self) -> np.ndarray:
        """The n x r matrix (u U1)."""
        return np.column_stack([self.u, self.U1])

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([[self.lambda1], self.D1])

    def reconstruct(self) -> np.ndarray:
        U = self.U
        return (U * self.eigenvalues) @ U.T

    def shifted(self, alpha: float) -> "SpectralData":
        """Spectral data of A + alpha u u^T (only the Perron value moves)."""
        return SpectralData(self.lambda1 + alpha, self.u, self.U1, self.D1)


@dataclass(frozen=True)
class VerifyReport:
    """Outcome of checking A = B C B^T."""

    valid: bool
    max_residual: float
    nonneg_ok: bool
    symmetry_ok: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "max_residual": self.max_residual,
            "nonneg_ok": self.nonneg_ok,
            "symmetry_ok": self.symmetry_ok,
            "tol": self.tol,
        }


# ── Spectral primitives ──────────────────────────────────────────────────────


def jacobi_eigh(
    a: np.ndarray,
    tol: float = JACOBI_TOL,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps visit (p, q) pairs in row order and stop once the off-diagonal
    Frobenius norm drops below ``tol * ||a||_F``.

    Returns:
        (w, V) with eigenvalues ascending and V orthogonal, a = V diag(w) V^T.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    norm = float(np.linalg.norm(a))
    if norm == 0.0 or n == 1:
        return np.diag(a).copy(), v

    for sweep in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off < tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < np.finfo(float).tiny:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                elif abs(theta) > THETA_LARGE:
                    # theta**2 would overflow; tan of the angle tends to 1/(2 theta)
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning("Jacobi did not converge in %d sweeps (n=%d)", max_sweeps, n)

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def _eigh(A) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(A, SymMatrix):
        return A.eigh
    return jacobi_eigh(as_array(A))


def _rank_threshold(w: np.ndarray, tol: Optional[float]) -> float:
    lam_max = float(np.max(np.abs(w))) if w.size else 0.0
    if tol is None:
        return w.shape[0] * RANK_EPS * lam_max
    return tol * max(1.0, lam_max)


def numerical_rank(A, tol: Optional[float] = None) -> int:
    """
    Number of eigenvalues with |lambda| above the threshold.

    Default threshold is ``n * 1e-12 * |lambda|_max``; an explicit ``tol`` is
    taken relative to ``max(1, |lambda|_max)``.
    """
    w, _ = _eigh(A)
    if not np.any(w):
        return 0
    return int(np.sum(np.abs(w) > _rank_threshold(w, tol)))


def inertia(A, tol: Optional[float] = None) -> Inertia:
    """Signs of the eigenvalues under the same threshold as numerical_rank."""
    w, _ = _eigh(A)
    thr = _rank_threshold(w, tol)
    pos = int(np.sum(w > thr))
    neg = int(np.sum(w < -thr))
    return Inertia(pos, neg, w.shape[0] - pos - neg)


def support_pattern(A, tol: float = 0.0) -> np.ndarray:
    """Boolean matrix marking entries with |a_ij| > tol."""
    return np.abs(as_array(A)) > tol


def is_irreducible(A, tol: Optional[float] = None) -> bool:
    """Breadth-first connectivity test on the undirected support graph."""
    a = as_array(A)
    n = a.shape[0]
    if n == 1:
        return True
    if tol is None:
        tol = DEFAULT_SYM_TOL * _scale(a)
    pattern = support_pattern(a, tol)
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        i = queue.popleft()
        for j in np.flatnonzero(pattern[i]):
            if not seen[j]:
                seen[j] = True
                queue.append(j)
    return bool(seen.all())


def perron(A) -> Tuple[float, np.ndarray]:
    """
    Perron eigenvalue and unit Perron eigenvector of an irreducible matrix.

    The vector is taken from the Jacobi decomposition and sign-fixed so its
    largest-magnitude entry is positive.

    Raises:
        IrreducibilityError: the support graph is disconnected.
    """
    if not is_irreducible(A):
        raise IrreducibilityError("Perron pair requested for a reducible matrix")
    w, V = _eigh(A)
    idx = int(np.argmax(w))
    u = np.array(V[:, idx], dtype=float)
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    u = np.maximum(u, 0.0)
    u /= np.linalg.norm(u)
    return float(w[idx]), u


def spectral_split(A, tol: Optional[float] = None) -> SpectralData:
    """
    Split an irreducible matrix into its Perron pair and the remaining
    nonzero eigenpairs (zero eigenvalues are dropped).

    Raises:
        IrreducibilityError: the support graph is disconnected.
        InvariantError: the kept pairs do not rebuild A to within
            r * 1e-8 * max(||A||_F, 1).
    """
    lam1, u = perron(A)
    w, V = _eigh(A)
    thr = _rank_threshold(w, tol)
    perron_idx = int(np.argmax(w))
    keep = [i for i in range(w.shape[0]) if i != perron_idx and abs(w[i]) > thr]
    keep.sort(key=lambda i: -w[i])
    U1 = V[:, keep] if keep else np.zeros((w.shape[0], 0))
    sd = SpectralData(lam1, u, U1, w[keep])

    a = as_array(A)
    err = float(np.linalg.norm(sd.reconstruct() - a))
    if err > sd.r * 1e-8 * max(float(np.linalg.norm(a)), 1.0):
        raise InvariantError(f"spectral split does not rebuild A (error {err:.3g}, r={sd.r})")
    return sd


# ── Factor manipulations ─────────────────────────────────────────────────────


def _check_permutation(perm: Sequence[int], size: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=int)
    if perm.shape != (size,) or sorted(perm.tolist()) != list(range(size)):
        raise InvariantError(f"{perm.tolist()} is not a permutation of 0..{size - 1}")
    return perm


def _check_positive(d: Sequence[float], size: int) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.shape != (size,):
        raise ShapeError(f"scaling vector must have length {size}")
    if np.any(d <= 0):
        raise InvariantError("scaling vector must be strictly positive")
    return d


def apply_scaling(F: Trifactor, perm: Sequence[int], d: Sequence[float]) -> Trifactor:
    """
    Re-express a factorization through a column permutation and a positive
    diagonal scaling: (B P D, D^-1 P^T C P D^-1) has the same product.
    """
    perm = _check_permutation(perm, F.k)
    d = _check_positive(d, F.k)
    B = F.B[:, perm] * d
    C = F.C[np.ix_(perm, perm)] / np.outer(d, d)
    return Trifactor(B, C)


def permute_scale_target(
    A, F: Trifactor, perm: Sequence[int], d: Sequence[float]
) -> Tuple[SymMatrix, Trifactor]:
    """
    Transform the target instead of the factor: (D P) A (D P)^T is
    factored by (D P B, C) with the same inner dimension.
    """
    a = as_array(A)
    perm = _check_permutation(perm, a.shape[0])
    d = _check_positive(d, a.shape[0])
    if F.n != a.shape[0]:
        raise ShapeError(f"factor has {F.n} rows, matrix is {a.shape[0]}x{a.shape[0]}")
    target = SymMatrix(a[np.ix_(perm, perm)] * np.outer(d, d))
    return target, Trifactor(F.B[perm] * d[:, None], F.C)


def verify_trifactorization(A, F: Trifactor, tol: float = 1e-9) -> VerifyReport:
    """
    Check that F is an SN-Trifactorization of A within ``tol``.

    Raises:
        ShapeError: B does not have n rows.
    """
    a = as_array(A)
    if F.n != a.shape[0]:
        raise ShapeError(f"factor has {F.n} rows, matrix is {a.shape[0]}x{a.shape[0]}")
    residual = float(np.max(np.abs(a - F.B @ F.C @ F.B.T)))
    nonneg_ok = bool(F.B.min() >= 0 and F.C.min() >= 0)
    symmetry_ok = bool(np.max(np.abs(F.C - F.C.T)) <= DEFAULT_SYM_TOL * _scale(F.C))
    return VerifyReport(
        valid=bool(residual <= tol and nonneg_ok and symmetry_ok),
        max_residual=residual,
        nonneg_ok=nonneg_ok,
        symmetry_ok=symmetry_ok,
        tol=tol,
    )
