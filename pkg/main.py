"""
SNT Toolkit - Main Entry Point

Command-line front end for symmetric nonnegative trifactorizations
A = B C B^T (B >= 0, C = C^T >= 0):
- verify a factorization against a matrix
- construct factors (EDM, rank-2, separable, powers, sums, NMF based)
- perturb a matrix along its Perron vector to reach inner dimension rk(A)
- certify whether a factorization can be moved to positive factors
- bound or search for the SNT-rank, and fit block completions
- re-run the worked examples

The JSON report goes to stdout, the human summary to stderr.

Usage:
    python main.py verify A.mat B.mat C.mat --tol 1e-9
    python main.py construct edm 6
    python main.py --seed 3 bounds A.mat
    python main.py examples all --xlsx output/checks.xlsx
"""

import argparse
import logging
import os
import sys
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from certificate import gordan_direction, movability_verdict
from completion import completion_lower_bound, completion_seeds, completion_upper_bound, fit_completion
from constructions import (
    NmfPair,
    bipartite_factor,
    direct_sum,
    edm_factor_any,
    power_factor,
    principal_subfactor,
    rank2_factor,
    separable_factor,
    sum_factor,
    symmetrization_factor,
)
from matcore import SntError, Trifactor, spectral_split, verify_trifactorization
from matrix_io import MatrixFormatError, read_matrix, read_sym_matrix, write_matrix
from perturbation import PerronSimilarity, optimize_S, perturb_factorization
from report import RunReport, export_checks_xlsx, print_banner, print_check_report, write_report
from search import FitOptions, bounds_report, fit_trifactorization, snt_upper_bound
from worked_examples import constants, resolve, run_examples


logger = logging.getLogger(__name__)

# Default configuration
DEFAULT_SEED = 0
DEFAULT_TOL = 1e-9
DEFAULT_RESTARTS = 30
DEFAULT_MAX_ITERS = 5000
DEFAULT_BUDGET = 2000
DEFAULT_OUTPUT = "output"

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_PARSE = 2


class UsageError(Exception):
    """Bad command-line input that argparse cannot catch (unknown example name)."""


def default_seed() -> int:
    """SNT_SEED from the environment, else DEFAULT_SEED."""
    value = os.environ.get("SNT_SEED")
    if value is None:
        return DEFAULT_SEED
    try:
        return int(value)
    except ValueError:
        logger.warning("ignoring non-integer SNT_SEED=%r", value)
        return DEFAULT_SEED


def _add_fit_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--restarts', type=int, default=DEFAULT_RESTARTS,
        help=f'Random restarts per inner dimension (default: {DEFAULT_RESTARTS})'
    )
    parser.add_argument(
        '--max-iters', type=int, default=DEFAULT_MAX_ITERS,
        help=f'Iterations per restart (default: {DEFAULT_MAX_ITERS})'
    )
    parser.add_argument(
        '--tol-residual', type=float, default=1e-7,
        help='Relative residual counted as an exact fit (default: 1e-7)'
    )


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(
        prog='snt',
        description='Symmetric nonnegative trifactorization toolkit',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
Examples:
  python main.py verify A.mat B.mat C.mat
  python main.py construct edm 4
  python main.py perturb A.mat --S S.mat
  python main.py certify B.mat C.mat
  python main.py paper-examples ex4.1
  python main.py examples perron-shift
        '''
    )
    parser.add_argument(
        '--seed', type=int, default=default_seed(),
        help=f'Random seed (default: $SNT_SEED or {DEFAULT_SEED})'
    )
    parser.add_argument(
        '--output', '-o', default=DEFAULT_OUTPUT,
        help=f'Directory for matrix files (default: {DEFAULT_OUTPUT})'
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging on stderr')

    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    # ── verify ───────────────────────────────────────────────────────────
    p = subparsers.add_parser('verify', help='Check that A = B C B^T with nonnegative factors')
    p.add_argument('A')
    p.add_argument('B')
    p.add_argument('C')
    p.add_argument('--tol', type=float, default=DEFAULT_TOL, help=f'Max abs residual (default: {DEFAULT_TOL})')

    # ── construct ────────────────────────────────────────────────────────
    p = subparsers.add_parser('construct', help='Build a factorization from a known construction')
    kinds = p.add_subparsers(dest='kind', required=True)
    k = kinds.add_parser('edm', help='Squared distance matrix M_n, k = ceil(n/2) + 2')
    k.add_argument('n', type=int)
    k = kinds.add_parser('rank2', help='k = 2 factor of a rank-2 matrix')
    k.add_argument('A')
    k = kinds.add_parser('separable', help='Factor through a generating set of columns')
    k.add_argument('A')
    k.add_argument('--cols', type=int, nargs='+', help='0-based columns (default: greedy)')
    k = kinds.add_parser('power', help='Factor of A^m from a factor of A')
    k.add_argument('B')
    k.add_argument('C')
    k.add_argument('--m', type=int, required=True)
    for name, help_text in (('sum', 'Factor of A1 + A2'), ('direct-sum', 'Factor of A1 (+) A2')):
        k = kinds.add_parser(name, help=help_text)
        for arg in ('B1', 'C1', 'B2', 'C2'):
            k.add_argument(arg)
    k = kinds.add_parser('principal', help='Factor of a principal submatrix')
    k.add_argument('B')
    k.add_argument('C')
    k.add_argument('--rows', type=int, nargs='+', required=True, help='0-based rows to keep')
    for name, help_text in (('bipartite', 'Factor of [[0, UV^T], [VU^T, 0]]'),
                            ('symmetrize', 'Factor of UV^T + VU^T')):
        k = kinds.add_parser(name, help=help_text)
        k.add_argument('U')
        k.add_argument('V')

    # ── perturb ──────────────────────────────────────────────────────────
    p = subparsers.add_parser('perturb', help='Factor A + alpha u u^T at inner dimension rk(A)')
    p.add_argument('A')
    group = p.add_mutually_exclusive_group()
    group.add_argument('--S', dest='S', help='Perron similarity S')
    group.add_argument('--S-inv', dest='S_inv', help='Inverse of the Perron similarity')
    p.add_argument('--beta', type=float, default=None, help='Explicit beta (default: minimal)')
    p.add_argument('--margin', type=float, default=0.0, help='Added to beta and alpha')
    p.add_argument(
        '--budget', type=int, default=DEFAULT_BUDGET,
        help=f'Candidate evaluations when searching for S (default: {DEFAULT_BUDGET})'
    )

    # ── certify ──────────────────────────────────────────────────────────
    p = subparsers.add_parser('certify', help='Movability verdict for a factor pair')
    p.add_argument('B')
    p.add_argument('C')

    # ── bounds / search ──────────────────────────────────────────────────
    p = subparsers.add_parser('bounds', help='SNT-rank interval')
    p.add_argument('A')
    _add_fit_options(p)

    p = subparsers.add_parser('search', help='Fit at inner dimension k, or scan k upward')
    p.add_argument('A')
    p.add_argument('--k', type=int, default=None, help='Inner dimension (default: scan from rk(A))')
    _add_fit_options(p)

    # ── complete ─────────────────────────────────────────────────────────
    p = subparsers.add_parser('complete', help='Fit the off-diagonal block of [[A1, X], [X^T, A2]]')
    p.add_argument('A1')
    p.add_argument('A2')
    p.add_argument('--k', type=int, required=True)
    p.add_argument('--strict-x', action='store_true', help='Require X > 0')
    _add_fit_options(p)

    # ── examples ─────────────────────────────────────────────────────────
    p = subparsers.add_parser('paper-examples', aliases=['examples'], help='Re-run worked examples')
    p.add_argument('name', nargs='?', default='all',
                   help='Example name (e.g. perron-shift), numbered alias (e.g. ex4.1) or "all"')
    p.add_argument('--xlsx', default=None, help='Also write the check table to this workbook')

    return parser


# ── Helpers ──────────────────────────────────────────────────────────────────


def _step(message: str) -> None:
    print(message, file=sys.stderr)


def _load(report: RunReport, path: str) -> np.ndarray:
    values = read_matrix(path)
    report.add_input(path)
    return values


def _load_sym(report: RunReport, path: str) -> np.ndarray:
    """Load a matrix that must be symmetric and nonnegative."""
    values = np.array(read_sym_matrix(path).entries)
    report.add_input(path)
    return values


def _load_factor(report: RunReport, b_path: str, c_path: str, strict: bool = True) -> Trifactor:
    return Trifactor(_load(report, b_path), _load(report, c_path), strict=strict)


def _fit_options(args) -> FitOptions:
    return FitOptions(
        restarts=args.restarts,
        max_iters=args.max_iters,
        tol_residual=args.tol_residual,
        seed=args.seed,
    ).checked()


def _save(args, report: RunReport, files: Dict[str, np.ndarray], comment: str) -> None:
    saved = {}
    for name, values in files.items():
        path = write_matrix(Path(args.output) / f"{name}.mat", values, comment)
        saved[name] = str(path)
        _step(f"  ✓ Saved: {path}")
    report.outputs["files"] = saved


# ── Commands ─────────────────────────────────────────────────────────────────


def cmd_verify(args, report: RunReport) -> bool:
    print_banner("SNT TOOLKIT: Verify")
    _step(f"\n[1/2] Loading {args.A}, {args.B}, {args.C}")
    A = _load(report, args.A)
    F = _load_factor(report, args.B, args.C, strict=False)
    _step(f"  n = {F.n}, k = {F.k}")

    _step("\n[2/2] Verifying...")
    result = verify_trifactorization(A, F, args.tol)
    report.outputs.update(result.to_dict())
    status = "✓ PASS" if result.valid else "✗ FAIL"
    _step(f"  {status}  max residual {result.max_residual:.3e} (tol {args.tol:g})")
    if not result.nonneg_ok:
        _step("  ✗ a factor has negative entries")
    if not result.symmetry_ok:
        _step("  ✗ C is not symmetric")
    return result.valid


def _construct(args, report: RunReport) -> Tuple[np.ndarray, Trifactor]:
    kind = args.kind
    if kind == 'edm':
        M, F = edm_factor_any(args.n)
        return M.entries, F
    if kind == 'rank2':
        A = _load(report, args.A)
        return A, rank2_factor(A)
    if kind == 'separable':
        A = _load(report, args.A)
        return A, separable_factor(A, cols=args.cols)
    if kind == 'power':
        F = power_factor(_load_factor(report, args.B, args.C), args.m)
    elif kind in ('sum', 'direct-sum'):
        F1 = _load_factor(report, args.B1, args.C1)
        F2 = _load_factor(report, args.B2, args.C2)
        F = sum_factor(F1, F2) if kind == 'sum' else direct_sum(F1, F2)
    elif kind == 'principal':
        F = principal_subfactor(_load_factor(report, args.B, args.C), args.rows)
    else:
        pair = NmfPair(_load(report, args.U), _load(report, args.V))
        F = bipartite_factor(pair) if kind == 'bipartite' else symmetrization_factor(pair)
    return F.product(), F


def cmd_construct(args, report: RunReport) -> bool:
    print_banner(f"SNT TOOLKIT: Construct ({args.kind})")
    _step("\n[1/2] Building factor...")
    target, F = _construct(args, report)
    result = verify_trifactorization(target, F, DEFAULT_TOL * max(1.0, float(np.abs(target).max())))
    _step(f"  ✓ n = {F.n}, k = {F.k}, max residual {result.max_residual:.3e}")
    report.outputs.update({
        "kind": args.kind,
        "n": F.n,
        "k": F.k,
        "valid": result.valid,
        "max_residual": result.max_residual,
    })

    _step("\n[2/2] Writing files...")
    _save(args, report, {"A": target, "B": F.B, "C": F.C}, f"construct {args.kind}")
    return result.valid


def cmd_perturb(args, report: RunReport) -> bool:
    print_banner("SNT TOOLKIT: Perron Perturbation")
    _step(f"\n[1/3] Loading {args.A}")
    A = _load_sym(report, args.A)
    sd = spectral_split(A)
    _step(f"  lambda1 = {sd.lambda1:.12g}, rank = {sd.r}")

    if args.S is not None:
        similarity = PerronSimilarity.from_matrix(_load(report, args.S))
        _step("\n[2/3] Using the given similarity")
    elif args.S_inv is not None:
        similarity = PerronSimilarity.from_inverse(_load(report, args.S_inv))
        _step("\n[2/3] Using the given inverse similarity")
    else:
        _step(f"\n[2/3] Searching for a similarity (budget {args.budget}, seed {args.seed})...")
        found = optimize_S(A, args.budget, seed=args.seed, spectral=sd)
        similarity = found.similarity
        report.outputs["search"] = {"alpha": found.alpha, "beta": found.beta, "evaluations": found.evaluations}
        _step(f"  ✓ best alpha {found.alpha:.12g} after {found.evaluations} evaluations")

    _step("\n[3/3] Building the perturbed factor...")
    result = perturb_factorization(A, similarity, spectral=sd, beta=args.beta, margin=args.margin)
    _step(f"  ✓ beta = {result.beta:.12g}, alpha = {result.alpha:.12g}, k = {result.F.k}")
    report.outputs.update(result.to_dict())
    _save(
        args, report,
        {"A_perturbed": result.A_perturbed.entries, "B": result.F.B, "C": result.F.C, "S": similarity.S},
        f"perturb alpha={result.alpha!r} beta={result.beta!r}",
    )
    return True


def cmd_certify(args, report: RunReport) -> bool:
    print_banner("SNT TOOLKIT: Movability Certificate")
    _step(f"\n[1/2] Loading {args.B}, {args.C}")
    B = _load(report, args.B)
    C = _load(report, args.C)

    _step("\n[2/2] Solving the boundary system...")
    verdict = movability_verdict(B, C)
    report.outputs.update(verdict.to_dict())
    direction = gordan_direction(B, C) if verdict.movable else None
    report.outputs["direction"] = direction
    _step(f"  {'✓' if verdict.movable else '•'} {verdict.reason}")
    _step(f"  {verdict.wording}")
    return True


def cmd_bounds(args, report: RunReport) -> bool:
    print_banner("SNT TOOLKIT: SNT-rank Bounds")
    _step(f"\n[1/2] Loading {args.A}")
    A = _load_sym(report, args.A)
    opts = _fit_options(args)

    _step("\n[2/2] Computing bounds...")
    bounds = bounds_report(A, opts)
    report.outputs.update(bounds.to_dict())
    lo, hi = bounds.interval
    _step(f"  rank {bounds.rank_lb}, Boolean rank {bounds.bool_rank_lb}, inertia {bounds.inertia_pair.as_tuple()}")
    _step(f"  ✓ SNT-rank in [{lo}, {hi}]{' (exact)' if bounds.exact else ''}")
    return True


def cmd_search(args, report: RunReport) -> bool:
    print_banner("SNT TOOLKIT: Search")
    _step(f"\n[1/2] Loading {args.A}")
    A = _load_sym(report, args.A)
    opts = _fit_options(args)

    if args.k is not None:
        _step(f"\n[2/2] Fitting at k = {args.k} ({opts.restarts} restarts)...")
        fit = fit_trifactorization(A, args.k, opts)
        F = fit.F
        report.outputs.update({
            "k": args.k,
            "rel_residual": fit.rel_residual,
            "restart": fit.restart,
            "iterations": fit.iterations,
            "reached_tol": fit.rel_residual <= opts.tol_residual,
        })
        _step(f"  best relative residual {fit.rel_residual:.3e} (start {fit.restart})")
    else:
        _step("\n[2/2] Scanning k upward from the rank...")
        upper = snt_upper_bound(A, opts)
        F = upper.F
        report.outputs.update({"k": upper.k, "fitted": upper.fitted, "per_k": upper.per_k})
        _step(f"  ✓ upper bound k = {upper.k}{'' if upper.fitted else ' (trivial)'}")
    _save(args, report, {"B": F.B, "C": F.C}, f"search k={F.k}")
    return True


def cmd_complete(args, report: RunReport) -> bool:
    print_banner("SNT TOOLKIT: Block Completion")
    _step(f"\n[1/2] Loading {args.A1}, {args.A2}")
    A1 = _load_sym(report, args.A1)
    A2 = _load_sym(report, args.A2)
    lower = completion_lower_bound(A1, A2)
    trivial, _ = completion_upper_bound(Trifactor.identity(A1), Trifactor.identity(A2))
    upper = min([trivial] + [F.k for F in completion_seeds(A1, A2)])
    _step(f"  inertia lower bound {lower}, constructive upper bound {upper}")

    _step(f"\n[2/2] Fitting at k = {args.k}{' with X > 0' if args.strict_x else ''}...")
    fit = fit_completion(A1, A2, args.k, strict_positive_X=args.strict_x, opts=_fit_options(args))
    report.outputs.update(fit.to_dict())
    report.outputs.update({
        "strict": args.strict_x,
        "lower_bound": lower,
        "upper_bound_trivial": trivial,
        "upper_bound": upper,
    })
    _step(f"  {'✓' if fit.success else '✗'} relative residual {fit.rel_residual:.3e}")
    _save(args, report, {"A": fit.F.product(), "X": fit.X, "B": fit.F.B, "C": fit.F.C}, f"complete k={args.k}")
    return True


def cmd_examples(args, report: RunReport) -> bool:
    try:
        keys = resolve(args.name)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from exc
    print_banner(f"SNT TOOLKIT: Worked Examples ({args.name})")
    table = run_examples(args.name)
    passed = print_check_report(table, title="CHECK RESULTS")
    report.outputs.update({
        "examples": keys,
        "constants": constants(),
        "passed": passed,
        "checks": table.to_dict(orient="records"),
    })
    if args.xlsx:
        path = export_checks_xlsx(table, args.xlsx)
        _step(f"  ✓ Saved: {path}")
    return passed


COMMANDS: Dict[str, Callable[..., bool]] = {
    'verify': cmd_verify,
    'construct': cmd_construct,
    'perturb': cmd_perturb,
    'certify': cmd_certify,
    'bounds': cmd_bounds,
    'search': cmd_search,
    'complete': cmd_complete,
    'paper-examples': cmd_examples,
    'examples': cmd_examples,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse ``argv``, run one command and print its JSON report.

    Returns:
        0 on success, 1 on a domain error or failed check, 2 on bad input
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_PARSE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_PARSE

    report = RunReport(command=args.command, seed=args.seed)
    started = time.perf_counter()
    try:
        ok = COMMANDS[args.command](args, report)
    except (MatrixFormatError, FileNotFoundError, UsageError) as exc:
        print(f"\n❌ Error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SntError as exc:
        print(f"\n❌ Error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        # option values argparse accepts but the library rejects
        print(f"\n❌ Error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    report.wall_time = time.perf_counter() - started
    write_report(report)
    return EXIT_OK if ok else EXIT_DOMAIN


def main() -> int:
    """Main entry point."""
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
