import math

import numpy as np
import pandas as pd
import pytest

from matrix_io import (
    MatrixFormatError,
    format_matrix,
    parse_matrix_text,
    parse_value,
    read_matrix,
    read_sym_matrix,
    write_matrix,
)


def test_parse_value_expressions():
    """Numbers and small sqrt expressions evaluate to doubles."""
    assert parse_value("2.5") == 2.5
    assert parse_value("-3") == -3.0
    assert parse_value("sqrt(2)/2") == pytest.approx(math.sqrt(2) / 2, abs=1e-16)
    assert parse_value("2+sqrt(3)") == pytest.approx(2 + math.sqrt(3), abs=1e-15)
    assert parse_value("1/(2*sqrt(6))") == pytest.approx(1 / (2 * math.sqrt(6)), abs=1e-16)
    assert parse_value("(-2)**3") == -8.0
    assert parse_value("2**-2") == 0.25


@pytest.mark.parametrize(
    "token",
    ["abc", "__import__('os')", "1/0", "sqrt(-1)", "2**2000.0", "9**9**9", "2**65", "(-8)**0.5"],
)
def test_parse_value_rejects_unsafe_or_invalid(token):
    """Names, calls other than sqrt, and invalid arithmetic are format errors."""
    with pytest.raises(MatrixFormatError):
        parse_value(token)


def test_parse_text_with_comments_and_rectangular_header():
    """Comment lines are skipped; 'n m' declares a rectangular matrix."""
    text = "# factor B\n3 2\n1 0\n# inline comment line\n0 1\nsqrt(2) 0\n"
    B = parse_matrix_text(text)
    assert B.shape == (3, 2)
    assert B[2, 0] == pytest.approx(math.sqrt(2))


@pytest.mark.parametrize(
    "text",
    ["", "x\n1\n", "2\n1 2\n", "2\n1 2\n3\n", "1 2 3\n1 2 3\n", "0\n"],
)
def test_parse_text_malformed(text):
    """Bad headers, row counts and row lengths are format errors."""
    with pytest.raises(MatrixFormatError):
        parse_matrix_text(text)


def test_write_then_read_is_exact(tmp_path, rng):
    """17 significant digits reproduce every double."""
    values = rng.uniform(0, 10, size=(4, 3)) / 7.0
    path = write_matrix(tmp_path / "B.mat", values, comment="random factor")
    np.testing.assert_array_equal(read_matrix(path), values)
    assert path.read_text().startswith("# random factor\n4 3\n")


def test_format_square_header():
    """Square matrices use the single-number header."""
    assert format_matrix(np.eye(2)).splitlines()[0] == "2"


def test_read_csv_and_xlsx(tmp_path):
    """CSV and Excel files are read without a header row."""
    df = pd.DataFrame([[1.0, 2.0], [2.0, 0.0]])
    df.to_csv(tmp_path / "A.csv", header=False, index=False)
    df.to_excel(tmp_path / "A.xlsx", header=False, index=False)
    np.testing.assert_array_equal(read_matrix(tmp_path / "A.csv"), df.to_numpy())
    np.testing.assert_array_equal(read_matrix(tmp_path / "A.xlsx"), df.to_numpy())


def test_missing_file(tmp_path):
    """A missing path raises FileNotFoundError."""
    with pytest.raises(FileNotFoundError):
        read_matrix(tmp_path / "nope.mat")


def test_read_sym_matrix(tmp_path):
    """The symmetric reader validates the matrix."""
    (tmp_path / "A.mat").write_text("2\n0 1\n1 0\n")
    assert read_sym_matrix(tmp_path / "A.mat").n == 2
