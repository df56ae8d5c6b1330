"""
Matrix File Handler

Reads and writes the plain-text matrix format used by every CLI command:

    # optional comment lines
    n            (or "n m" for a rectangular factor)
    row 1 values
    ...

Values are decimal numbers or small expressions such as ``sqrt(2)/2`` or
``2+sqrt(3)`` (no spaces inside one value), so worked examples can be typed
exactly. ``.csv`` and ``.xlsx`` files are read through pandas with no header
row.
"""

from __future__ import annotations

import ast
import math
import operator
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from matcore import SymMatrix


class MatrixFormatError(ValueError):
    """Malformed matrix file or value expression."""


MAX_EXPONENT = 64.0


def _power(base: float, exponent: float) -> float:
    if abs(exponent) > MAX_EXPONENT:
        raise MatrixFormatError(f"exponent {exponent:g} exceeds {MAX_EXPONENT:g}")
    if base < 0 and not float(exponent).is_integer():
        raise MatrixFormatError(f"negative base {base:g} with fractional exponent {exponent:g}")
    return math.pow(base, exponent)


_BINARY_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: _power,
}
_UNARY_OPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCTIONS = {"sqrt": math.sqrt}


def _evaluate(node: ast.AST) -> float:
    if isinstance(node, ast.Expression):
        return _evaluate(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.BinOp) and type(node.op) in _BINARY_OPS:
        return _BINARY_OPS[type(node.op)](_evaluate(node.left), _evaluate(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY_OPS:
        return _UNARY_OPS[type(node.op)](_evaluate(node.operand))
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id in _FUNCTIONS
        and len(node.args) == 1
        and not node.keywords
    ):
        return _FUNCTIONS[node.func.id](_evaluate(node.args[0]))
    raise MatrixFormatError(f"unsupported expression element: {ast.dump(node)}")


def parse_value(token: str) -> float:
    """Evaluate one matrix entry: a number or an arithmetic/sqrt expression."""
    try:
        return float(token)
    except ValueError:
        pass
    try:
        tree = ast.parse(token, mode="eval")
        value = _evaluate(tree)
    except (SyntaxError, ZeroDivisionError, ValueError, OverflowError) as exc:
        raise MatrixFormatError(f"cannot evaluate '{token}': {exc}") from exc
    if not math.isfinite(value):
        raise MatrixFormatError(f"'{token}' is not finite")
    return value


def parse_matrix_text(text: str, source: str = "<text>") -> np.ndarray:
    """Parse the text format into a float array."""
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MatrixFormatError(f"{source}: empty matrix file")

    header = lines[0].split()
    try:
        dims = [int(h) for h in header]
    except ValueError as exc:
        raise MatrixFormatError(f"{source}: header must be 'n' or 'n m', got '{lines[0]}'") from exc
    if len(dims) == 1:
        rows, cols = dims[0], dims[0]
    elif len(dims) == 2:
        rows, cols = dims
    else:
        raise MatrixFormatError(f"{source}: header must be 'n' or 'n m', got '{lines[0]}'")
    if rows < 1 or cols < 1:
        raise MatrixFormatError(f"{source}: dimensions must be positive")

    body = lines[1:]
    if len(body) != rows:
        raise MatrixFormatError(f"{source}: expected {rows} rows, found {len(body)}")
    data: List[List[float]] = []
    for i, line in enumerate(body, start=1):
        tokens = line.split()
        if len(tokens) != cols:
            raise MatrixFormatError(f"{source}: row {i} has {len(tokens)} values, expected {cols}")
        data.append([parse_value(t) for t in tokens])
    return np.array(data, dtype=float)


def read_matrix(filepath: Union[str, Path]) -> np.ndarray:
    """
    Load a matrix from disk.

    Args:
        filepath: ``.mat``/``.txt`` text format, ``.csv`` or ``.xlsx``

    Raises:
        FileNotFoundError: path does not exist
        MatrixFormatError: content cannot be parsed
    """
    path = Path(filepath)
    if not path.exists():
        raise FileNotFoundError(f"Matrix file not found: {path}")

    suffix = path.suffix.lower()
    if suffix in (".csv", ".xlsx"):
        if suffix == ".csv":
            df = pd.read_csv(path, header=None)
        else:
            df = pd.read_excel(path, header=None)
        try:
            return df.map(lambda v: parse_value(str(v).strip())).to_numpy(dtype=float)
        except MatrixFormatError as exc:
            raise MatrixFormatError(f"{path}: {exc}") from exc
    return parse_matrix_text(path.read_text(encoding="utf-8"), source=str(path))


def read_sym_matrix(filepath: Union[str, Path]) -> SymMatrix:
    return SymMatrix(read_matrix(filepath))


def format_matrix(values, comment: Optional[str] = None) -> str:
    """Render an array in the text format with 17 significant digits."""
    arr = np.atleast_2d(np.asarray(values, dtype=float))
    rows, cols = arr.shape
    out = []
    if comment:
        out.extend(f"# {line}" for line in comment.splitlines())
    out.append(f"{rows}" if rows == cols else f"{rows} {cols}")
    for row in arr:
        out.append(" ".join(format(float(v), ".17g") for v in row))
    return "\n".join(out) + "\n"


def write_matrix(filepath: Union[str, Path], values, comment: Optional[str] = None) -> Path:
    path = Path(filepath)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_matrix(values, comment), encoding="utf-8")
    return path
