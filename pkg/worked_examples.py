"""
Worked Examples Module

Reproducible checks of the classic SNT examples. Every example is a
function returning CheckRow entries (expected vs computed, with the
tolerance used); ``run_examples`` collects them into one DataFrame.

Provides:
- the irrational constants used by the examples, found by bisection
- the example matrices and factors
- EXAMPLES, the registry of named checks, the numbered ALIASES that
  ``paper-examples`` accepts, and run_examples()
"""

from __future__ import annotations

import logging
from functools import lru_cache
from typing import Callable, Dict, List

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from certificate import boundary_certificate, gordan_direction
from completion import (
    GlueInput,
    completion_lower_bound,
    fit_completion,
    rank1_glue,
    rank1_glue_rank1,
)
from constructions import (
    NmfPair,
    edm_factor,
    edm_factor_any,
    power_factor,
    separable_factor,
    symmetrization_factor,
)
from matcore import (
    NotSeparableError,
    SpectralData,
    Trifactor,
    numerical_rank,
    perron,
    permute_scale_target,
    verify_trifactorization,
)
from perturbation import PerronSimilarity, perturb_factorization
from report import CheckRow, checks_dataframe
from search import FitOptions, bounds_report, boolean_rank, fit_trifactorization


logger = logging.getLogger(__name__)

ROOT_XTOL = 1e-14
EXACT_TOL = 1e-12


# ── Constants ────────────────────────────────────────────────────────────────


@lru_cache(maxsize=None)
def s_root() -> float:
    """Real root of s^3 + s^2 + 5 s + 1, which lies in [-1, 0]."""
    return float(bisect(lambda s: s ** 3 + s ** 2 + 5 * s + 1, -1.0, 0.0, xtol=ROOT_XTOL))


@lru_cache(maxsize=None)
def alpha3_root() -> float:
    """Root of x^3 + 2 x^2 - 64 x - 256 in [8, 9]."""
    return float(bisect(lambda x: x ** 3 + 2 * x ** 2 - 64 * x - 256, 8.0, 9.0, xtol=ROOT_XTOL))


def constants() -> Dict[str, float]:
    return {
        "sqrt2": float(np.sqrt(2.0)),
        "sqrt3": float(np.sqrt(3.0)),
        "s": s_root(),
        "alpha3": alpha3_root(),
    }


# ── Example data ─────────────────────────────────────────────────────────────


def cycle_pattern() -> np.ndarray:
    return np.array([[1, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 1]], dtype=float)


def gram_matrix() -> np.ndarray:
    return np.array([[4, 2, 2, 0], [2, 3, 1, 2], [2, 1, 3, 2], [0, 2, 2, 4]], dtype=float)


def gram_factor() -> Trifactor:
    r2 = np.sqrt(2.0)
    L = np.array([[2, 0, 0], [1, r2, 0], [1, 0, r2], [0, r2, r2]])
    return Trifactor(L, np.eye(3))


def obstruction_matrix() -> np.ndarray:
    """Rank three, nonnegative rank three, SNT-rank four."""
    return np.array([[1, 1, 2, 2], [1, 0, 1, 2], [2, 1, 0, 1], [2, 2, 1, 1]], dtype=float)


def obstruction_nmf() -> NmfPair:
    U = np.array([[0, 1, 1], [0, 0, 1], [1, 0, 0], [1, 1, 0]], dtype=float)
    Vt = np.array([[2, 1, 0, 1], [0, 1, 1, 0], [1, 0, 1, 2]], dtype=float)
    return NmfPair(U, Vt.T)


def obstruction_square_factor() -> Trifactor:
    B = np.array([[0, 1, 1], [0, 0, 1], [1, 0, 0], [1, 1, 0]], dtype=float)
    C = np.array([[6, 1, 4], [1, 2, 1], [4, 1, 6]], dtype=float)
    return Trifactor(B, C)


def star_nmf(m: int = 3) -> NmfPair:
    """M = U V^T with M + M^T = [[0, 2, e^T], [2, 0, e^T], [e, e, 0]], e of length m."""
    U = np.vstack([[0.0, 1.0], [1.0, 0.0], np.ones((m, 2))])
    V = np.vstack([np.eye(2), np.zeros((m, 2))])
    return NmfPair(U, V)


def star_factor(m: int = 3) -> Trifactor:
    B = np.zeros((m + 2, 3))
    B[0, 0] = B[1, 1] = 1.0
    B[2:, 2] = 1.0
    C = np.array([[0, 2, 1], [2, 0, 1], [1, 1, 0]], dtype=float)
    return Trifactor(B, C)


def shift_matrix() -> np.ndarray:
    return np.array([[0, 2, 1, 1], [2, 0, 1, 1], [1, 1, 0, 2], [1, 1, 2, 0]], dtype=float)


def shift_spectral(U1: np.ndarray) -> SpectralData:
    """Spectral data of shift_matrix() for a chosen basis of the -2 eigenspace."""
    return SpectralData(4.0, np.full(4, 0.5), U1, np.array([-2.0, -2.0]))


def shift_cases() -> Dict[str, dict]:
    """The three similarities with their eigenbases and expected outcomes."""
    r2, r3, r6 = np.sqrt(2.0), np.sqrt(3.0), np.sqrt(6.0)
    s = s_root()
    S1 = np.array([[r2, r3, 1], [r2, -r3, 1], [r2, 0, -2]]) / r6
    U1_1 = np.column_stack([
        np.array([3, -3, -r3, r3]) / (2 * r6),
        np.array([1, -1, r3, -r3]) / (2 * r2),
    ])
    S2 = np.array([[2, 2, 2], [2, -1 + r3, -1 - r3], [2, -1 - r3, -1 + r3]]) / (2 * r3)
    U1_2 = np.column_stack([np.array([0, 0, -1, 1]) / r2, np.array([-1, 1, 0, 0]) / r2])
    S3_inv = np.array([[1, 1, 1], [-1, 1, s], [-1, s, 1]])
    U1_3 = np.column_stack([np.array([0, 0, 1, -1]) / r2, np.array([1, -1, 0, 0]) / r2])
    hollow = 2.0 * (np.ones((3, 3)) - np.eye(3))
    return {
        "S1": {
            "similarity": PerronSimilarity.from_matrix(S1),
            "U1": U1_1,
            "beta": 2.0,
            "alpha": 12.0,
            "B": np.array([[4, 1, 1], [0, 3, 3], [2, 2 + r3, 2 - r3], [2, 2 - r3, 2 + r3]]) / (2 * r3),
            "C": hollow,
        },
        "S2": {
            "similarity": PerronSimilarity.from_matrix(S2),
            "U1": U1_2,
            "beta": (r6 + r2) / 2,
            "alpha": 4 * (1 + r3),
            "B": np.array([
                [3 - r3, 6 + 2 * r3, 2 * r3],
                [3 + 3 * r3, 0, 6],
                [3 - r3, 2 * r3, 6 + 2 * r3],
                [3 + 3 * r3, 6, 0],
            ]) / (6 * r2),
            "C": hollow,
        },
        "S3": {
            "similarity": PerronSimilarity.from_inverse(S3_inv),
            "U1": U1_3,
            "beta": r2,
            "alpha": alpha3_root(),
            "B": np.array([[0, 1 + s, 2], [2, 1 - s, 0], [0, 2, 1 + s], [2, 0, 1 - s]]) / r2,
            "C": None,
        },
    }


def shift_result(name: str):
    case = shift_cases()[name]
    return perturb_factorization(shift_matrix(), case["similarity"], spectral=shift_spectral(case["U1"]))


def edm_sizes() -> List[int]:
    return [2, 4, 6, 8, 10]


def completion_blocks():
    return np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])


def completion_factor(a: float = 1.0) -> Trifactor:
    B = np.array([[1, 0, 0], [0, 1, 0.5], [0, 2 * a, 0], [0, 0, 1 / (2 * a)]], dtype=float)
    C = np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=float)
    return Trifactor(B, C)


def family_vector() -> np.ndarray:
    return np.array([1.0, 2.0, 2.0]) / 3.0


# ── Checks ───────────────────────────────────────────────────────────────────


def check_rank_gaps() -> List[CheckRow]:
    """Pattern with rank 3 < SNT-rank 4, and a Gram matrix where all ranks equal 3."""
    A = cycle_pattern()
    G = gram_matrix()
    rows = [
        CheckRow("rank of the 0/1 pattern", 3, numerical_rank(A)),
        CheckRow("Boolean rank of the pattern", 4, boolean_rank(A)),
        CheckRow("SNT-rank interval of the pattern", (4, 4), bounds_report(A).interval),
        CheckRow("Gram factor verifies", True,
                 verify_trifactorization(G, gram_factor(), EXACT_TOL).valid),
        CheckRow("rank of the Gram matrix", 3, numerical_rank(G)),
    ]
    fit = fit_trifactorization(G, 3, FitOptions(restarts=30))
    rows.append(CheckRow("fit at k=3 reaches 1e-6", True, fit.rel_residual < 1e-6))
    try:
        separable_factor(G, cols=[0, 1, 2])
        separable = True
    except NotSeparableError:
        separable = False
    rows.append(CheckRow("Gram matrix is not separable on its first columns", False, separable))
    return rows


def check_symmetrization() -> List[CheckRow]:
    """M + M^T via the NMF of M needs k=4; an explicit factor reaches the rank 3."""
    pair = star_nmf()
    A = pair.product() + pair.product().T
    F = symmetrization_factor(pair)
    return [
        CheckRow("rank of M + M^T", 3, numerical_rank(A)),
        CheckRow("symmetrization factor k", 4, F.k),
        CheckRow("symmetrization factor verifies", True, verify_trifactorization(A, F, EXACT_TOL).valid),
        CheckRow("explicit k=3 factor verifies", True,
                 verify_trifactorization(A, star_factor(), EXACT_TOL).valid),
    ]


def check_rank3_obstruction() -> List[CheckRow]:
    """Nonnegative rank 3 but no k=3 trifactorization."""
    A = obstruction_matrix()
    pair = obstruction_nmf()
    grid = np.linspace(0.0, 1.0, 102)[1:-1]
    x, y = np.meshgrid(grid, grid)
    c33 = 2 * (1 - x) * (1 - y) - 3
    fit3 = fit_trifactorization(A, 3, FitOptions(restarts=20, max_iters=1500))
    fit4 = fit_trifactorization(A, 4, FitOptions(restarts=1))
    return [
        CheckRow("rank", 3, numerical_rank(A)),
        CheckRow("NMF with k=3 reproduces A", 0.0, float(np.max(np.abs(pair.product() - A))), EXACT_TOL),
        CheckRow("forced c33 is negative on the open square", True, bool(np.all(c33 < 0))),
        CheckRow("supremum of c33 is below -1", True, float(c33.max()) < -1.0),
        CheckRow("fit at k=3 stays above 1e-3", True, fit3.rel_residual >= 1e-3),
        CheckRow("fit at k=4 is exact", True, fit4.rel_residual < 1e-9),
    ]


def check_square() -> List[CheckRow]:
    """The square of the obstruction matrix drops back to SNT-rank 3."""
    A = obstruction_matrix()
    A2 = A @ A
    expected = np.array([[10, 7, 5, 8], [7, 6, 4, 5], [5, 4, 6, 7], [8, 5, 7, 10]], dtype=float)
    F = obstruction_square_factor()
    P = power_factor(Trifactor.identity(A), 2)
    return [
        CheckRow("A^2", expected, A2, EXACT_TOL),
        CheckRow("rank of A^2", 3, numerical_rank(A2)),
        CheckRow("k=3 factor of A^2 verifies", True, verify_trifactorization(A2, F, 1e-10).valid),
        CheckRow("power factor of the identity factor", expected, P.product(), 1e-10),
    ]


def check_edm() -> List[CheckRow]:
    rows = []
    for n in edm_sizes():
        M, F = edm_factor(n)
        rows.append(CheckRow(f"M_{n} factor k", n // 2 + 2, F.k))
        rows.append(CheckRow(f"M_{n} residual", 0.0, float(np.max(np.abs(F.product() - M.entries))), EXACT_TOL))
    for n in (5, 7):
        M, F = edm_factor_any(n)
        rows.append(CheckRow(f"M_{n} (odd) factor k", (n + 1) // 2 + 2, F.k))
        rows.append(CheckRow(f"M_{n} (odd) verifies", True, verify_trifactorization(M, F, EXACT_TOL).valid))
    rows.append(CheckRow("rank of M_10", 3, numerical_rank(edm_factor(10)[0])))
    return rows


def check_perron_shift() -> List[CheckRow]:
    """Minimal beta and alpha for three Perron similarities."""
    A = shift_matrix()
    lam, u = perron(A)
    D = np.ones((4, 4)) - np.eye(4)
    rows = [
        CheckRow("Perron value", 4.0, lam, 1e-12),
        CheckRow("Perron vector", np.full(4, 0.5), u, 1e-12),
        CheckRow("rank", 3, numerical_rank(A)),
        CheckRow("Boolean rank of the derangement pattern", 4, boolean_rank(D)),
    ]
    for name, case in shift_cases().items():
        res = shift_result(name)
        alpha_tol = 1e-8 if name == "S3" else 1e-10
        rows.append(CheckRow(f"{name} minimal beta", case["beta"], res.beta, 1e-10))
        rows.append(CheckRow(f"{name} minimal alpha", case["alpha"], res.alpha, alpha_tol))
        rows.append(CheckRow(f"{name} B", case["B"], res.F.B, 1e-6))
        if case["C"] is not None:
            rows.append(CheckRow(f"{name} C", case["C"], res.F.C, 1e-6))
        rows.append(CheckRow(f"{name} factor k", 3, res.F.k))
    shifted = A + 12.0 * np.outer(u, u)
    rows.append(CheckRow("A + 12 u u^T is A + 3 J", A + 3.0, shifted, 1e-12))
    return rows


def check_certificates() -> List[CheckRow]:
    """Only the third factor admits a nonzero boundary certificate."""
    s = s_root()
    F1 = shift_result("S1").F
    F3 = shift_result("S3").F
    cert1 = boundary_certificate(F1.B, F1.C)
    cert3 = boundary_certificate(F3.B, F3.C)
    rows = [
        CheckRow("first factor has only the zero solution", True, cert1 is None),
        CheckRow("first factor has a Gordan direction", True, gordan_direction(F1.B, F1.C) is not None),
        CheckRow("third factor has a certificate", True, cert3 is not None),
    ]
    if cert3 is None:
        return rows

    X, W, C3 = cert3.X, cert3.W, F3.C
    w33 = W[2, 2]
    r2 = np.sqrt(2.0)
    rows.extend([
        CheckRow("X support", [(0, 0), (1, 2), (2, 0), (3, 1)], cert3.x_support()),
        CheckRow("W is diagonal", 0.0, float(np.max(np.abs(W - np.diag(np.diag(W))))), 1e-9),
        CheckRow("x11 / w33", r2 * C3[0, 1] / (3 + s), X[0, 0] / w33, 1e-6),
        CheckRow("x23 / w33", r2 * C3[1, 2] / (1 - s), X[1, 2] / w33, 1e-6),
        CheckRow("x31 = x11", X[0, 0], X[2, 0], 1e-6),
        CheckRow("x42 = x23", X[1, 2], X[3, 1], 1e-6),
        CheckRow("w11 / w33", 2 * C3[1, 2] / (C3[0, 1] * (1 - s)), W[0, 0] / w33, 1e-6),
        CheckRow("w22 / w33", 1.0, W[1, 1] / w33, 1e-6),
        CheckRow("third factor has no Gordan direction", True, gordan_direction(F3.B, F3.C) is None),
    ])
    return rows


def check_completion() -> List[CheckRow]:
    """Completing I_2 and the 2x2 swap: 3 with X >= 0, not 3 with X > 0."""
    A1, A2 = completion_blocks()
    F = completion_factor(1.0)
    X = np.array([[0.0, 0.0], [1.0, 0.5]])
    A = np.block([[A1, X], [X.T, A2]])
    loose = fit_completion(A1, A2, 3, opts=FitOptions(restarts=30))
    strict = fit_completion(A1, A2, 3, strict_positive_X=True, opts=FitOptions(restarts=20, max_iters=1500))
    return [
        CheckRow("inertia lower bound", 3, completion_lower_bound(A1, A2)),
        CheckRow("explicit k=3 completion verifies", True, verify_trifactorization(A, F, EXACT_TOL).valid),
        CheckRow("fit k=3 with X >= 0 reaches 1e-6", True, loose.rel_residual < 1e-6),
        CheckRow("fit k=3 with X > 0 fails", False, strict.success),
        CheckRow("strict residual stays above tolerance", True,
                 strict.rel_residual > FitOptions().tol_residual),
    ]


def check_glue() -> List[CheckRow]:
    """Two rank-one glues rebuild the shift matrix from 2x2 blocks."""
    r2 = np.sqrt(2.0)
    A2_factor = Trifactor.identity(np.array([[0.0, 2.0], [2.0, 0.0]]))
    F0 = Trifactor(np.ones((2, 1)), [[2.0]])
    A_hat, F_hat = rank1_glue(GlueInput.from_factors(F0, A2_factor))
    expected_hat = np.array([[2, r2, r2], [r2, 0, 2], [r2, 2, 0]])

    A_swapped, F_swapped = permute_scale_target(A_hat, F_hat, [2, 1, 0], np.ones(3))
    A, F = rank1_glue(GlueInput.from_factors(F_swapped, A2_factor))
    return [
        CheckRow("first glue", expected_hat, A_hat.entries, 1e-12),
        CheckRow("first glue k", 3, F_hat.k),
        CheckRow("first glue rank", 2, numerical_rank(A_hat)),
        CheckRow("second glue gives the shift matrix", shift_matrix(), A.entries, 1e-12),
        CheckRow("second glue k", 5, F.k),
        CheckRow("second glue factor verifies", True, verify_trifactorization(A, F, 1e-10).valid),
        CheckRow("rank identity", numerical_rank(A_swapped) + 2 - 1, numerical_rank(A)),
    ]


def check_glue_family() -> List[CheckRow]:
    """A(v) keeps SNT-rank at most 4 with nonnegative rank 3."""
    A_hat = obstruction_matrix()
    v = family_vector()
    g = GlueInput(Trifactor.identity(A_hat), Trifactor(v, [[1.0]]), v, 1.0)
    A, F = rank1_glue_rank1(g)
    a = A_hat[:3, 3]
    U = np.vstack([[0, 1, 1], [0, 0, 1], [1, 0, 0], np.outer(v, [1, 1, 0])])
    Vt = np.hstack([np.array([[2, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=float),
                    np.vstack([v, np.zeros(3), 2 * v])])
    expected = np.block([[A_hat[:3, :3], np.outer(a, v)], [np.outer(v, a), np.outer(v, v)]])
    return [
        CheckRow("glued matrix", expected, A.entries, 1e-12),
        CheckRow("rank", 3, numerical_rank(A)),
        CheckRow("factor k stays 4", 4, F.k),
        CheckRow("rank-3 NMF reproduces A(v)", expected, U @ Vt, 1e-12),
    ]


EXAMPLES: Dict[str, Callable[[], List[CheckRow]]] = {
    "rank-gaps": check_rank_gaps,
    "symmetrization": check_symmetrization,
    "rank3-obstruction": check_rank3_obstruction,
    "square": check_square,
    "edm": check_edm,
    "perron-shift": check_perron_shift,
    "certificates": check_certificates,
    "completion": check_completion,
    "glue": check_glue,
    "glue-family": check_glue_family,
}


ALIASES: Dict[str, str] = {
    "ex2.3": "rank-gaps",
    "ex2.6": "symmetrization",
    "ex2.10": "rank3-obstruction",
    "ex2.11": "square",
    "ex4.1": "perron-shift",
    "ex4.2": "certificates",
    "ex5.completion": "completion",
    "ex5.glue": "glue",
    "ex5.family": "glue-family",
}


def resolve(name: str) -> List[str]:
    """
    Map a registry key, a numbered alias or "all" to registry keys.

    Raises:
        KeyError: unknown name
    """
    if name == "all":
        return list(EXAMPLES)
    name = ALIASES.get(name, name)
    if name not in EXAMPLES:
        choices = sorted(EXAMPLES) + sorted(ALIASES) + ["all"]
        raise KeyError(f"unknown example '{name}'; choose from {choices}")
    return [name]


def run_examples(name: str = "all") -> pd.DataFrame:
    """Run the named example(s) and return one combined check table."""
    frames = []
    for key in resolve(name):
        logger.info("running example %s", key)
        frames.append(checks_dataframe(EXAMPLES[key](), example=key))
    return pd.concat(frames, ignore_index=True)
