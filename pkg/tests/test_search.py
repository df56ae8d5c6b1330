from dataclasses import replace
from itertools import combinations, product

import numpy as np
import pytest

from search import (
    FitOptions,
    Objective,
    boolean_rank,
    bounds_report,
    descend,
    fit_trifactorization,
    maximal_bicliques,
    objective_gradient,
    objective_value,
    pad_factor,
    snt_upper_bound,
)
from constructions import NmfPair, bipartite_factor
from matcore import Trifactor, verify_trifactorization


CYCLE = np.array([[1, 1, 0, 0], [1, 0, 1, 0], [0, 1, 0, 1], [0, 0, 1, 1]], dtype=float)
GRAM = np.array([[4, 2, 2, 0], [2, 3, 1, 2], [2, 1, 3, 2], [0, 2, 2, 4]], dtype=float)


def _fd_gradient(f, X, h=1e-6):
    G = np.zeros_like(X)
    for idx in np.ndindex(X.shape):
        E = np.zeros_like(X)
        E[idx] = h
        G[idx] = (f(X + E) - f(X - E)) / (2 * h)
    return G


def _rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)


def test_gradient_matches_finite_differences(rng):
    """Analytic gradients of the least-squares objective."""
    for _ in range(20):
        n, k = int(rng.integers(2, 6)), int(rng.integers(1, 5))
        A = rng.uniform(size=(n, n))
        A = A + A.T
        B = rng.uniform(size=(n, k))
        C = rng.uniform(size=(k, k))
        C = C + C.T
        gB, gC = objective_gradient(A, B, C)
        assert _rel_err(gB, _fd_gradient(lambda X: objective_value(A, X, C), B)) < 1e-4
        assert _rel_err(gC, _fd_gradient(lambda X: objective_value(A, B, X), C)) < 1e-4


def test_hinge_gradient_matches_finite_differences(rng):
    """The positivity hinge on the off-diagonal block is differentiated correctly."""
    n1, n2, k = 2, 3, 3
    target = np.zeros((5, 5))
    target[:2, :2] = np.eye(2)
    target[2:, 2:] = 1.0
    weights = np.zeros((5, 5))
    weights[:2, :2] = 1.0
    weights[2:, 2:] = 1.0
    obj = Objective(target, weights, slice(0, n1), slice(n1, n1 + n2), hinge_eps=0.8)
    B = rng.uniform(0.0, 0.5, size=(5, k))
    C = rng.uniform(0.0, 0.5, size=(k, k))
    C = C + C.T
    gB, gC = obj.gradients(B, C)
    assert _rel_err(gB, _fd_gradient(lambda X: obj.value(X, C), B)) < 1e-4
    # the hinge sees one block of P only, so C is perturbed symmetrically
    assert _rel_err(gC, _fd_gradient(lambda X: obj.value(B, 0.5 * (X + X.T)), C)) < 1e-4


def test_descend_is_monotone(rng):
    """Accepted steps never increase the objective."""
    obj = Objective(GRAM)
    B0 = rng.uniform(size=(4, 3))
    _, _, f, _, history = descend(obj, B0, np.eye(3), FitOptions(max_iters=300))
    assert all(b <= a + 1e-12 * max(1.0, a) for a, b in zip(history, history[1:]))
    assert f == history[-1]


def test_fit_options_validation():
    """Invalid options are collected and raised together."""
    ok, errors = FitOptions(restarts=0, backtrack=1.5).validate()
    assert not ok
    assert len(errors) == 2
    with pytest.raises(ValueError):
        FitOptions(max_iters=0).checked()
    assert FitOptions().validate() == (True, [])


def test_fit_at_full_dimension_is_exact(obstruction_matrix):
    """k >= n starts from the identity factor."""
    result = fit_trifactorization(obstruction_matrix, 4, FitOptions(restarts=1))
    assert result.rel_residual == 0.0
    assert result.restart < 0


def test_fit_gram_matrix_at_rank():
    """The Gram matrix has an exact k=3 fit."""
    result = fit_trifactorization(GRAM, 3, FitOptions(restarts=30))
    assert result.rel_residual < 1e-6
    assert result.F.k == 3


def test_fit_is_deterministic():
    """Same seed, same factor."""
    opts = FitOptions(restarts=3, max_iters=200, seed=11)
    a = fit_trifactorization(CYCLE, 3, opts)
    b = fit_trifactorization(CYCLE, 3, opts)
    np.testing.assert_array_equal(a.F.B, b.F.B)
    assert a.rel_residual == b.rel_residual


def test_obstruction_matrix_resists_k3(obstruction_matrix):
    """No start gets below 1e-3 at k=3."""
    result = fit_trifactorization(obstruction_matrix, 3, FitOptions(restarts=50, max_iters=2000))
    assert result.rel_residual >= 1e-3


def test_pad_factor():
    """Zero columns extend k; shrinking is impossible."""
    F = Trifactor([[1.0], [2.0]], [[3.0]])
    G = pad_factor(F, 3)
    assert G.k == 3
    np.testing.assert_allclose(G.product(), F.product())
    assert pad_factor(G, 2) is None


def test_upper_bound_scan():
    """Rank-1 and rank-2 matrices are fitted at their rank."""
    ones = snt_upper_bound(np.ones((3, 3)))
    assert (ones.k, ones.fitted) == (1, True)
    W = np.array([[1.0, 0.2], [0.3, 1.0], [0.5, 0.5], [1.0, 1.0], [0.1, 0.9]])
    A = W @ np.array([[1.0, 0.5], [0.5, 2.0]]) @ W.T
    result = snt_upper_bound(A, FitOptions(restarts=5))
    assert result.k == 2
    assert verify_trifactorization(A, result.F, 1e-7 * np.linalg.norm(A)).valid


def _oracle_boolean_rank(P, max_k):
    """Smallest cover by maximal all-ones rectangles, by brute force over combinations."""
    n, m = P.shape
    ones = {(i, j) for i, j in zip(*np.nonzero(P))}
    if not ones:
        return 0
    rects = []
    for rows in product([0, 1], repeat=n):
        R = [i for i in range(n) if rows[i]]
        if not R:
            continue
        K = [j for j in range(m) if all(P[i, j] for i in R)]
        if not K:
            continue
        R_full = [i for i in range(n) if all(P[i, j] for j in K)]
        cells = frozenset((i, j) for i in R_full for j in K)
        if cells not in rects:
            rects.append(cells)
    for k in range(1, max_k + 1):
        for combo in combinations(rects, k):
            if frozenset().union(*combo) == ones:
                return k
    return None


def test_boolean_rank_known_values():
    """Derangement and cycle patterns need four rectangles."""
    D = np.ones((4, 4)) - np.eye(4)
    assert boolean_rank(D) == 4
    assert boolean_rank(CYCLE) == 4
    assert boolean_rank(np.eye(5)) == 5
    assert boolean_rank(np.ones((3, 4))) == 1
    assert boolean_rank(np.zeros((2, 2))) == 0
    assert boolean_rank(np.eye(4), max_k=3) is None
    with pytest.raises(ValueError):
        boolean_rank(np.eye(2), max_k=9)
    assert len(maximal_bicliques(np.eye(3))) == 3


def test_boolean_rank_against_brute_force_3x3():
    """Every 3x3 pattern."""
    for bits in range(1 << 9):
        P = np.array([(bits >> b) & 1 for b in range(9)], dtype=bool).reshape(3, 3)
        assert boolean_rank(P) == _oracle_boolean_rank(P, 3)


def test_boolean_rank_against_brute_force_4x4(rng):
    """Random and structured 4x4 patterns."""
    patterns = [rng.uniform(size=(4, 4)) < p for p in np.linspace(0.3, 0.8, 30)]
    patterns.append(CYCLE.astype(bool))
    patterns.append(~np.eye(4, dtype=bool))
    for P in patterns:
        assert boolean_rank(P) == _oracle_boolean_rank(P, 4)


def test_bounds_report_intervals(shift_matrix):
    """Exact intervals where rank or Boolean rank meets n, or a fit meets the rank."""
    report = bounds_report(CYCLE)
    assert report.interval == (4, 4)
    assert report.exact
    assert report.bool_rank_lb == 4

    shifted = bounds_report(shift_matrix)
    assert (shifted.rank_lb, shifted.bool_rank_lb) == (3, 4)
    assert shifted.interval == (4, 4)
    assert shifted.inertia_pair.as_tuple() == (1, 2, 1)

    W = np.array([[1.0, 0.2], [0.3, 1.0], [0.5, 0.5], [1.0, 1.0], [0.1, 0.9]])
    A = W @ W.T
    low = bounds_report(A, FitOptions(restarts=5))
    assert low.interval == (2, 2)
    d = low.to_dict()
    assert d["interval"] == [2, 2]
    assert d["cp_rank"] == "unknown"
    assert d["per_k"][0]["k"] == 2


def test_best_restart_is_the_minimum():
    """The reported start is the argmin of the per-start residuals."""
    opts = FitOptions(restarts=4, max_iters=400, seed=3)
    rels = [
        fit_trifactorization(CYCLE, 2, replace(opts, restarts=1, seed=opts.seed + i)).rel_residual
        for i in range(opts.restarts)
    ]
    best = fit_trifactorization(CYCLE, 2, opts)
    assert best.rel_residual == min(rels)
    assert best.restart == rels.index(min(rels))

    early = fit_trifactorization(CYCLE, 2, replace(opts, stop_at_tol=True))
    hits = [i for i, r in enumerate(rels) if r <= opts.tol_residual]
    assert early.restart == (hits[0] if hits else rels.index(min(rels)))


def test_upper_bound_of_rank_one_bipartite_matrix():
    """[[0, w h^T], [h w^T, 0]] is fitted at k = 2."""
    pair = NmfPair(np.array([[1.0], [2.0], [0.5]]), np.array([[3.0], [1.0]]))
    A = bipartite_factor(pair).product()
    result = snt_upper_bound(A, FitOptions(restarts=2, max_iters=200))
    assert result.fitted
    assert result.k <= 2
