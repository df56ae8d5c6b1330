import json
from pathlib import Path

import numpy as np
import pytest

from main import EXIT_DOMAIN, EXIT_OK, EXIT_PARSE, run
from matrix_io import read_matrix
from worked_examples import completion_blocks, shift_cases, shift_result


def _invoke(capsys, argv):
    """Run the CLI and return (exit code, parsed JSON report or None)."""
    code = run(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_verify_valid_and_invalid(capsys, write_mat):
    """A valid factorization exits 0; a negative C is reported and exits 1."""
    A = write_mat("A", [[2.0, 1.0], [1.0, 2.0]])
    B = write_mat("B", np.eye(2))
    C = write_mat("C", [[2.0, 1.0], [1.0, 2.0]])
    code, report = _invoke(capsys, ["verify", A, B, C])
    assert code == EXIT_OK
    assert report["command"] == "verify"
    assert report["outputs"]["valid"] is True
    assert set(report["inputs"]) == {A, B, C}

    C_bad = write_mat("C_bad", [[2.0, -1.0], [-1.0, 2.0]])
    A_bad = write_mat("A_bad", [[2.0, -1.0], [-1.0, 2.0]])
    code, report = _invoke(capsys, ["verify", A_bad, B, C_bad])
    assert code == EXIT_DOMAIN
    assert report["outputs"]["valid"] is False
    assert report["outputs"]["nonneg_ok"] is False


def test_construct_edm_writes_factor_files(capsys, tmp_path: Path):
    """construct edm 4 gives k = 4 and files that multiply back to M_4."""
    out_dir = tmp_path / "out"
    code, report = _invoke(capsys, ["-o", str(out_dir), "construct", "edm", "4"])
    assert code == EXIT_OK
    outputs = report["outputs"]
    assert (outputs["n"], outputs["k"], outputs["valid"]) == (4, 4, True)

    files = outputs["files"]
    A, B, C = (read_matrix(files[name]) for name in ("A", "B", "C"))
    i, j = np.indices((4, 4))
    np.testing.assert_array_equal(A, (i - j) ** 2)
    np.testing.assert_allclose(B @ C @ B.T, A, atol=1e-12)


def test_construct_domain_error(capsys, write_mat, shift_matrix):
    """rank2 on a rank-3 matrix is a domain error with no report."""
    A = write_mat("A", shift_matrix)
    code, report = _invoke(capsys, ["construct", "rank2", A])
    assert code == EXIT_DOMAIN
    assert report is None


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["verify", "--bogus"],
        ["construct", "edm"],
        ["examples", "no-such-example"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    assert _invoke(capsys, argv)[0] == EXIT_PARSE


def test_bad_and_missing_files_exit_2(capsys, tmp_path: Path, write_mat):
    """Malformed files and missing paths are input errors."""
    bad = tmp_path / "bad.mat"
    bad.write_text("2\n1 2\n")
    good = write_mat("B", np.eye(2))
    assert _invoke(capsys, ["verify", str(bad), good, good])[0] == EXIT_PARSE
    assert _invoke(capsys, ["verify", str(tmp_path / "missing.mat"), good, good])[0] == EXIT_PARSE


def test_invalid_fit_option_exits_2(capsys, write_mat, shift_matrix):
    A = write_mat("A", shift_matrix)
    assert _invoke(capsys, ["search", A, "--k", "3", "--restarts", "0"])[0] == EXIT_PARSE


def test_examples_command(capsys, tmp_path: Path):
    """One named example; --xlsx writes the workbook."""
    xlsx = tmp_path / "checks.xlsx"
    code, report = _invoke(capsys, ["examples", "perron-shift", "--xlsx", str(xlsx)])
    assert code == EXIT_OK
    outputs = report["outputs"]
    assert outputs["examples"] == ["perron-shift"]
    assert outputs["passed"] is True
    assert all(row["passed"] for row in outputs["checks"])
    assert 8.71 < outputs["constants"]["alpha3"] < 8.72
    assert xlsx.exists()

    code, report = _invoke(capsys, ["examples", "edm"])
    assert code == EXIT_OK
    assert report["command"] == "examples"
    assert report["outputs"]["examples"] == ["edm"]

    code, report = _invoke(capsys, ["paper-examples", "ex4.1"])
    assert code == EXIT_OK
    assert report["command"] == "paper-examples"
    assert report["outputs"]["examples"] == ["perron-shift"]

    assert _invoke(capsys, ["paper-examples", "ex9.9"])[0] == EXIT_PARSE


def test_seed_from_environment(capsys, monkeypatch, tmp_path: Path):
    """SNT_SEED sets the default seed; --seed overrides it."""
    monkeypatch.setenv("SNT_SEED", "7")
    out = ["-o", str(tmp_path)]
    assert _invoke(capsys, out + ["construct", "edm", "2"])[1]["seed"] == 7
    assert _invoke(capsys, ["--seed", "3"] + out + ["construct", "edm", "2"])[1]["seed"] == 3


def test_search_is_deterministic(capsys, tmp_path: Path, write_mat, obstruction_matrix):
    """Two runs with the same seed produce identical outputs."""
    A = write_mat("A", obstruction_matrix)
    argv = ["--seed", "5", "-o", str(tmp_path / "out"), "search", A, "--k", "3",
            "--restarts", "3", "--max-iters", "200"]
    first = _invoke(capsys, argv)[1]
    second = _invoke(capsys, argv)[1]
    assert first["outputs"] == second["outputs"]
    assert first["outputs"]["reached_tol"] is False


def test_certify_reports_verdicts(capsys, tmp_path: Path, write_mat):
    """A certificate for the third similarity factor, a direction for the first."""
    F3 = shift_result("S3").F
    code, report = _invoke(capsys, ["certify", write_mat("B3", F3.B), write_mat("C3", F3.C)])
    assert code == EXIT_OK
    assert report["outputs"]["movable"] is False
    assert report["outputs"]["certificate"] is not None
    assert report["outputs"]["direction"] is None

    F1 = shift_result("S1").F
    code, report = _invoke(capsys, ["certify", write_mat("B1", F1.B), write_mat("C1", F1.C)])
    assert code == EXIT_OK
    assert report["outputs"]["movable"] is True
    assert np.asarray(report["outputs"]["direction"]).shape == (3, 3)


def test_perturb_with_given_similarity(capsys, tmp_path: Path, write_mat, shift_matrix):
    """Written factors multiply to the written perturbed matrix at k = rk(A)."""
    A = write_mat("A", shift_matrix)
    S = write_mat("S", shift_cases()["S1"]["similarity"].S)
    code, report = _invoke(capsys, ["-o", str(tmp_path / "out"), "perturb", A, "--S", S])
    assert code == EXIT_OK
    outputs = report["outputs"]
    assert outputs["k"] == 3
    assert outputs["alpha"] >= 0.0

    files = outputs["files"]
    A_pert, B, C = (read_matrix(files[name]) for name in ("A_perturbed", "B", "C"))
    assert B.min() >= 0.0 and C.min() >= 0.0
    np.testing.assert_allclose(B @ C @ B.T, A_pert, atol=1e-9)
    np.testing.assert_allclose(A_pert - shift_matrix, outputs["alpha"] / 4.0, atol=1e-9)


def test_perturb_searches_when_no_similarity(capsys, tmp_path: Path, write_mat, shift_matrix):
    A = write_mat("A", shift_matrix)
    code, report = _invoke(capsys, ["-o", str(tmp_path), "perturb", A, "--budget", "50"])
    assert code == EXIT_OK
    assert report["outputs"]["search"]["alpha"] == pytest.approx(report["outputs"]["alpha"])


def test_complete_reports_bounds(capsys, tmp_path: Path, write_mat):
    """Block completion of I_2 and the swap matrix."""
    A1, A2 = completion_blocks()
    argv = ["-o", str(tmp_path), "complete", write_mat("A1", A1), write_mat("A2", A2),
            "--k", "3", "--restarts", "2", "--max-iters", "200"]
    code, report = _invoke(capsys, argv)
    assert code == EXIT_OK
    outputs = report["outputs"]
    assert (outputs["lower_bound"], outputs["upper_bound_trivial"]) == (3, 4)
    assert outputs["upper_bound"] == 3
    assert outputs["success"] is True
    assert outputs["strict"] is False
    X = read_matrix(outputs["files"]["X"])
    assert X.shape == (2, 2)
    assert X.min() >= 0.0


def test_negative_input_is_a_domain_error(capsys, tmp_path: Path, write_mat):
    """Commands that take a symmetric nonnegative matrix reject negative entries."""
    A = write_mat("A", np.array([[1.0, -1.0], [-1.0, 1.0]]))
    code, _ = _invoke(capsys, ["-o", str(tmp_path), "search", A, "--k", "1"])
    assert code == EXIT_DOMAIN
