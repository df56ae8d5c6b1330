"""
Search Module

Numerical estimation of SNT-rank bounds:
- projected-gradient fitting of A ~ B C B^T at a fixed inner dimension
- an upper-bound scan over k from the rank up to n
- Boolean rank of the support pattern (a lower bound on the nonnegative rank)
- an aggregated report with the resulting interval and its provenance
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from constructions import rank2_factor, separable_factor
from matcore import (
    Inertia,
    SntError,
    Trifactor,
    as_array,
    inertia,
    numerical_rank,
    support_pattern,
    verify_trifactorization,
)


logger = logging.getLogger(__name__)

MIN_STEP = 1e-30
STAGNATION_WINDOW = 50
STAGNATION_RTOL = 1e-9
BOOLEAN_RANK_MAX_DIM = 8


@dataclass
class FitOptions:
    """Tuning for the projected-gradient fit."""

    restarts: int = 30
    max_iters: int = 5000
    tol_residual: float = 1e-7
    seed: int = 0
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    # end the restart loop at the first start reaching tol_residual
    stop_at_tol: bool = False

    def validate(self) -> Tuple[bool, List[str]]:
        errors = []
        if self.restarts < 1:
            errors.append(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iters < 1:
            errors.append(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol_residual <= 0:
            errors.append("tol_residual must be positive")
        if not 0 < self.armijo_c < 1:
            errors.append("armijo_c must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            errors.append("backtrack must lie in (0, 1)")
        return len(errors) == 0, errors

    def checked(self) -> "FitOptions":
        ok, errors = self.validate()
        if not ok:
            raise ValueError("Invalid fit options: " + "; ".join(errors))
        return self


@dataclass
class FitResult:
    F: Trifactor
    rel_residual: float
    restart: int
    iterations: int
    history: List[float] = field(default_factory=list, repr=False)


@dataclass
class UpperBoundResult:
    k: int
    F: Trifactor
    fitted: bool
    per_k: List[Dict[str, float]] = field(default_factory=list)


@dataclass
class BoundReport:
    """SNT-rank interval with the source of every bound."""

    n: int
    rank_lb: int
    bool_rank_lb: Optional[int]
    inertia_pair: Inertia
    upper_n: int
    upper_fit: Optional[int]
    per_k: List[Dict[str, float]]
    notes: Dict[str, str]
    cp_rank: str = "unknown"

    @property
    def lower(self) -> int:
        return max(self.rank_lb, self.bool_rank_lb or 0)

    @property
    def upper(self) -> int:
        return min(self.upper_n, self.upper_fit if self.upper_fit is not None else self.upper_n)

    @property
    def interval(self) -> Tuple[int, int]:
        return (self.lower, self.upper)

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    def to_dict(self) -> dict:
        return {
            "rank_lb": self.rank_lb,
            "bool_rank_lb": self.bool_rank_lb,
            "inertia": list(self.inertia_pair.as_tuple()),
            "upper_n": self.upper_n,
            "upper_fit": self.upper_fit,
            "interval": list(self.interval),
            "cp_rank": self.cp_rank,
            "per_k": self.per_k,
            "notes": self.notes,
        }


# ── Objective ────────────────────────────────────────────────────────────────


@dataclass
class Objective:
    """
    Weighted least squares ||W o (A - B C B^T)||_F^2, optionally with the
    hinge penalty sum max(0, eps - P_ij)^2 over one off-diagonal block of
    P = B C B^T.
    """

    target: np.ndarray
    weights: Optional[np.ndarray] = None
    hinge_rows: Optional[slice] = None
    hinge_cols: Optional[slice] = None
    hinge_eps: float = 0.0

    def _parts(self, B: np.ndarray, C: np.ndarray):
        P = B @ C @ B.T
        E = self.target - P
        if self.weights is not None:
            E = self.weights * E
        hinge = None
        if self.hinge_rows is not None:
            hinge = np.maximum(0.0, self.hinge_eps - P[self.hinge_rows, self.hinge_cols])
        return E, hinge

    def value(self, B: np.ndarray, C: np.ndarray) -> float:
        E, hinge = self._parts(B, C)
        f = float(np.sum(E * E))
        if hinge is not None:
            f += float(np.sum(hinge * hinge))
        return f

    def gradient_wrt_product(self, B: np.ndarray, C: np.ndarray) -> np.ndarray:
        """Symmetric gradient of the objective with respect to P."""
        E, hinge = self._parts(B, C)
        G = -2.0 * E
        if hinge is not None:
            H = np.zeros_like(G)
            H[self.hinge_rows, self.hinge_cols] = -2.0 * hinge
            G = G + 0.5 * (H + H.T)
        return G

    def gradients(self, B: np.ndarray, C: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(grad_B, grad_C); for the plain fit these are -4 E B C and -2 B^T E B."""
        G = self.gradient_wrt_product(B, C)
        return 2.0 * G @ B @ C, B.T @ G @ B

    def scale(self) -> float:
        t = self.target if self.weights is None else self.weights * self.target
        return max(float(np.linalg.norm(t)), 1e-300)


def objective_value(A, B: np.ndarray, C: np.ndarray) -> float:
    return Objective(as_array(A)).value(B, C)


def objective_gradient(A, B: np.ndarray, C: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return Objective(as_array(A)).gradients(B, C)


# ── Projected gradient ───────────────────────────────────────────────────────


def _project_B(B: np.ndarray) -> np.ndarray:
    return np.maximum(B, 0.0)


def _project_C(C: np.ndarray) -> np.ndarray:
    return np.maximum(0.5 * (C + C.T), 0.0)


def _armijo(x, f, g, step, project, evaluate, opts: FitOptions):
    """Backtrack along the projection arc until the Armijo condition holds."""
    while step > MIN_STEP:
        x_new = project(x - step * g)
        decrease = float(np.sum(g * (x_new - x)))
        if decrease >= 0.0:
            return x, f, step, False
        f_new = evaluate(x_new)
        if f_new <= f + opts.armijo_c * decrease:
            return x_new, f_new, step, True
        step *= opts.backtrack
    return x, f, step, False


def _bb_step(s: np.ndarray, y: np.ndarray, fallback: float) -> float:
    sy = float(np.sum(s * y))
    if sy <= 0.0:
        return min(fallback * 2.0, 1e10)
    return float(np.clip(np.sum(s * s) / sy, 1e-10, 1e10))


def descend(obj: Objective, B: np.ndarray, C: np.ndarray, opts: FitOptions):
    """
    Alternating projected-gradient descent on B and C, each block with a
    Barzilai-Borwein trial step and Armijo backtracking. Every accepted step
    keeps the objective nonincreasing.

    Returns:
        (B, C, f, iterations, history)
    """
    B = _project_B(np.array(B, dtype=float))
    C = _project_C(np.array(C, dtype=float))
    f = obj.value(B, C)
    history = [f]
    target = (opts.tol_residual * obj.scale()) ** 2
    gB, gC = obj.gradients(B, C)
    step_b = 1.0 / max(float(np.linalg.norm(gB)), 1e-12)
    step_c = 1.0 / max(float(np.linalg.norm(gC)), 1e-12)
    checkpoint = f
    it = 0

    for it in range(1, opts.max_iters + 1):
        if f <= target:
            break
        gB, _ = obj.gradients(B, C)
        B_new, f, used, moved_b = _armijo(B, f, gB, step_b, _project_B, lambda X: obj.value(X, C), opts)
        if moved_b:
            gB_new, _ = obj.gradients(B_new, C)
            step_b = _bb_step(B_new - B, gB_new - gB, used)
            B = B_new
        else:
            step_b = 1.0 / max(float(np.linalg.norm(gB)), 1e-12)

        _, gC = obj.gradients(B, C)
        C_new, f, used, moved_c = _armijo(C, f, gC, step_c, _project_C, lambda X: obj.value(B, X), opts)
        if moved_c:
            _, gC_new = obj.gradients(B, C_new)
            step_c = _bb_step(C_new - C, gC_new - gC, used)
            C = C_new
        else:
            step_c = 1.0 / max(float(np.linalg.norm(gC)), 1e-12)

        history.append(f)
        if not (moved_b or moved_c):
            break
        if it % STAGNATION_WINDOW == 0:
            if f > (1.0 - STAGNATION_RTOL) * checkpoint:
                break
            checkpoint = f
    return B, C, f, it, history


def pad_factor(F: Trifactor, k: int) -> Optional[Trifactor]:
    """Append zero columns to reach inner dimension k (None if F.k > k)."""
    if F.k > k:
        return None
    if F.k == k:
        return F
    extra = k - F.k
    B = np.hstack([F.B, np.zeros((F.n, extra))])
    C = np.zeros((k, k))
    C[:F.k, :F.k] = F.C
    return Trifactor(B, C)


def _random_start(a: np.ndarray, k: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    B = rng.uniform(0.0, 1.0, size=(a.shape[0], k))
    BBt = float(np.linalg.norm(B @ B.T))
    target = float(np.linalg.norm(a))
    if BBt > 0 and target > 0:
        B *= np.sqrt(target / BBt)
    return B, np.eye(k)


def run_restarts(
    obj: Objective,
    k: int,
    opts: FitOptions,
    initial: Sequence[Trifactor] = (),
) -> FitResult:
    """
    Seeds first, then ``opts.restarts`` random starts (restart i drawn from
    seed + i); the result is the best by (residual, start index).

    An exact start (residual 0) ends the loop since no later start can beat
    it. With ``opts.stop_at_tol`` the first start reaching the tolerance
    does too.
    """
    opts.checked()
    n = obj.target.shape[0]
    starts: List[Tuple[int, np.ndarray, np.ndarray]] = []
    for s, F in enumerate(initial):
        padded = pad_factor(F, k)
        if padded is not None and padded.n == n:
            starts.append((-len(initial) + s, padded.B, padded.C))

    best: Optional[Tuple[float, int, FitResult]] = None
    scale = obj.scale()

    def attempts():
        yield from starts
        for restart in range(opts.restarts):
            rng = np.random.default_rng(opts.seed + restart)
            B0, C0 = _random_start(obj.target, k, rng)
            yield restart, B0, C0

    for index, B0, C0 in attempts():
        B, C, f, iters, history = descend(obj, B0, C0, opts)
        rel = float(np.sqrt(max(f, 0.0)) / scale)
        logger.debug("k=%d start=%d rel_residual=%.3g iters=%d", k, index, rel, iters)
        if best is None or (rel, index) < (best[0], best[1]):
            best = (rel, index, FitResult(Trifactor(B, C), rel, index, iters, history))
        if rel == 0.0 or (opts.stop_at_tol and rel <= opts.tol_residual):
            break
    return best[2]


def fit_trifactorization(
    A,
    k: int,
    opts: Optional[FitOptions] = None,
    initial: Sequence[Trifactor] = (),
) -> FitResult:
    """
    Best-effort nonnegative fit of A by B C B^T with inner dimension k.

    For k >= n the identity factor is tried first, so the fit is exact there.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    opts = opts or FitOptions()
    a = as_array(A)
    seeds = list(initial)
    if k >= a.shape[0]:
        seeds.insert(0, Trifactor.identity(a))
    return run_restarts(Objective(a), k, opts, seeds)


def _exact_seeds(A) -> List[Trifactor]:
    """Closed-form factors tried before random starts."""
    a = as_array(A)
    seeds: List[Trifactor] = []
    r = numerical_rank(A)
    if r == 1:
        j = int(np.argmax(np.diag(a)))
        if a[j, j] > 0:
            seeds.append(Trifactor(a[:, j] / np.sqrt(a[j, j]), [[1.0]]))
    if r == 2:
        try:
            seeds.append(rank2_factor(A))
        except SntError as exc:
            logger.debug("rank-2 seed unavailable: %s", exc)
    try:
        seeds.append(separable_factor(A))
    except SntError as exc:
        logger.debug("separable seed unavailable: %s", exc)
    return seeds


def snt_upper_bound(A, opts: Optional[FitOptions] = None, start_k: Optional[int] = None) -> UpperBoundResult:
    """
    Scan k upward from the numerical rank (or ``start_k``) and return the
    first k whose fit reaches ``opts.tol_residual``; k = n always succeeds
    through the exact factor (I, A).
    """
    # any start under the tolerance is a witness for k
    opts = replace(opts or FitOptions(), stop_at_tol=True)
    a = as_array(A)
    n = a.shape[0]
    norm = max(float(np.linalg.norm(a)), 1.0)
    k0 = max(1, numerical_rank(A) if start_k is None else start_k)
    seeds = _exact_seeds(A)
    per_k: List[Dict[str, float]] = []

    for k in range(k0, n):
        result = fit_trifactorization(a, k, opts, [s for s in seeds if s.k <= k])
        per_k.append({"k": k, "residual": result.rel_residual})
        logger.info("k=%d best relative residual %.3g", k, result.rel_residual)
        if result.rel_residual <= opts.tol_residual:
            report = verify_trifactorization(a, result.F, opts.tol_residual * norm)
            if report.valid:
                return UpperBoundResult(k, result.F, True, per_k)
            logger.warning("k=%d fit passed but failed re-verification", k)

    per_k.append({"k": n, "residual": 0.0})
    return UpperBoundResult(n, Trifactor.identity(a), False, per_k)


# ── Boolean rank ─────────────────────────────────────────────────────────────


def maximal_bicliques(pattern: np.ndarray) -> List[int]:
    """
    All maximal all-ones submatrices, each as a bitmask over cells
    (cell (i, j) is bit i * m + j).
    """
    P = np.asarray(pattern, dtype=bool)
    n, m = P.shape
    row_masks = [sum(1 << j for j in range(m) if P[i, j]) for i in range(n)]
    found = set()
    for subset in range(1, 1 << n):
        cols = (1 << m) - 1
        for i in range(n):
            if subset >> i & 1:
                cols &= row_masks[i]
        if not cols:
            continue
        rows = [i for i in range(n) if row_masks[i] & cols == cols]
        cells = 0
        for i in rows:
            cells |= cols << (i * m)
        found.add(cells)
    return sorted(found)


def boolean_rank(pattern, max_k: int = 8) -> Optional[int]:
    """
    Smallest number of all-ones submatrices covering exactly the true
    entries, by iterative-deepening depth-first search over maximal
    bicliques (branching on the lowest uncovered cell).

    Returns:
        The Boolean rank, or None when it exceeds ``max_k``.
    """
    if max_k > 8:
        raise ValueError("boolean_rank is exhaustive; max_k must be <= 8")
    P = np.asarray(pattern, dtype=bool)
    n, m = P.shape
    target = 0
    for i, j in np.argwhere(P):
        target |= 1 << (int(i) * m + int(j))
    if target == 0:
        return 0

    bicliques = maximal_bicliques(P)
    by_cell: Dict[int, List[int]] = {}
    for cells in bicliques:
        bits = cells
        while bits:
            low = bits & -bits
            by_cell.setdefault(low.bit_length() - 1, []).append(cells)
            bits ^= low

    def cover(uncovered: int, depth: int, dead: set) -> bool:
        if uncovered == 0:
            return True
        if depth == 0 or (uncovered, depth) in dead:
            return False
        cell = (uncovered & -uncovered).bit_length() - 1
        for cells in by_cell[cell]:
            if cover(uncovered & ~cells, depth - 1, dead):
                return True
        dead.add((uncovered, depth))
        return False

    for k in range(1, max_k + 1):
        if cover(target, k, set()):
            return k
    return None


def bounds_report(A, opts: Optional[FitOptions] = None) -> BoundReport:
    """Assemble rank, Boolean-rank and fitted bounds into an SNT-rank interval."""
    opts = opts or FitOptions()
    a = as_array(A)
    n = a.shape[0]
    notes: Dict[str, str] = {
        "rank_lb": "numerical rank: rk(A) <= st+(A)",
        "upper_n": "trivial factor A = I A I^T",
        "cp_rank": "not computed; complete positivity is not decided",
    }

    rank_lb = numerical_rank(A)
    bool_lb: Optional[int] = None
    if n <= BOOLEAN_RANK_MAX_DIM:
        bool_lb = boolean_rank(support_pattern(a, 1e-12 * max(1.0, float(a.max()))))
        notes["bool_rank_lb"] = "Boolean rank of the support: bool-rank <= rk+(A) <= st+(A)"
    else:
        notes["bool_rank_lb"] = f"skipped: exhaustive search limited to n <= {BOOLEAN_RANK_MAX_DIM}"

    lower = max(rank_lb, bool_lb or 0, 1)
    upper_fit: Optional[int] = None
    per_k: List[Dict[str, float]] = []
    if lower < n:
        result = snt_upper_bound(a, opts, start_k=lower)
        per_k = result.per_k
        if result.fitted and result.k < n:
            upper_fit = result.k
            notes["upper_fit"] = f"projected-gradient fit verified at k={result.k}"
        else:
            notes["upper_fit"] = "no fit below n reached the tolerance (evidence, not proof)"
    elif lower == n:
        notes["upper_fit"] = "not needed: lower bound equals n"

    return BoundReport(
        n=n,
        rank_lb=rank_lb,
        bool_rank_lb=bool_lb,
        inertia_pair=inertia(A),
        upper_n=n,
        upper_fit=upper_fit,
        per_k=per_k,
        notes=notes,
    )
