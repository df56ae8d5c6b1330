"""
Report Module

Provides:
- RunReport, the JSON envelope every CLI command prints
- check tables (expected vs computed) as pandas DataFrames
- the console summary and a colour-coded Excel export of check tables
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, TextIO, Union

import numpy as np
import pandas as pd
from openpyxl.styles import PatternFill


__version__ = "0.1.0"
SCHEMA_VERSION = 1

PASS_FILL = PatternFill(start_color="C6EFCE", end_color="C6EFCE", fill_type="solid")
FAIL_FILL = PatternFill(start_color="FFC7CE", end_color="FFC7CE", fill_type="solid")


def to_jsonable(value: Any) -> Any:
    """Convert numpy values, dataclasses and tuples into JSON-ready types."""
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        # repr of a float is its shortest round-trip form (at most 17 digits)
        return value if math.isfinite(value) else None
    return value


def file_digest(path: Union[str, Path]) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RunReport:
    """JSON envelope of one CLI invocation; ``outputs`` depends only on inputs and seed."""

    command: str
    seed: int
    inputs: Dict[str, str] = field(default_factory=dict)
    outputs: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = __version__
    schema: int = SCHEMA_VERSION

    def add_input(self, path: Union[str, Path]) -> None:
        self.inputs[str(path)] = file_digest(path)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "schema": self.schema,
            "command": self.command,
            "version": self.version,
            "seed": self.seed,
            "inputs": dict(self.inputs),
            "outputs": to_jsonable(self.outputs),
            "wall_time": self.wall_time,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        data = json.loads(text)
        return cls(
            command=data["command"],
            seed=data["seed"],
            inputs=data.get("inputs", {}),
            outputs=data.get("outputs", {}),
            wall_time=data.get("wall_time", 0.0),
            version=data.get("version", __version__),
            schema=data.get("schema", SCHEMA_VERSION),
        )


# ── Check tables ─────────────────────────────────────────────────────────────


@dataclass
class CheckRow:
    """One expected-vs-computed comparison."""

    check: str
    expected: Any
    computed: Any
    tol: Optional[float] = None
    passed: Optional[bool] = None

    def __post_init__(self):
        if self.passed is None:
            self.passed = self._compare()

    def _compare(self) -> bool:
        if self.tol is None:
            return self.expected == self.computed
        exp = np.asarray(self.expected, dtype=float)
        got = np.asarray(self.computed, dtype=float)
        if exp.shape != got.shape:
            return False
        return bool(np.all(np.abs(exp - got) <= self.tol))


def _cell(value: Any) -> Any:
    if isinstance(value, np.ndarray) or isinstance(value, (list, tuple)):
        arr = np.asarray(value, dtype=float)
        if arr.size == 1:
            return float(arr.ravel()[0])
        return np.array2string(arr, precision=6, separator=", ")
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def checks_dataframe(rows: Iterable[CheckRow], example: str = "") -> pd.DataFrame:
    """Tabulate checks with columns example, check, expected, computed, tol, passed."""
    records = [
        {
            "example": example,
            "check": r.check,
            "expected": _cell(r.expected),
            "computed": _cell(r.computed),
            "tol": r.tol,
            "passed": bool(r.passed),
        }
        for r in rows
    ]
    return pd.DataFrame(records, columns=["example", "check", "expected", "computed", "tol", "passed"])


def print_banner(title: str, stream: Optional[TextIO] = None) -> None:
    stream = stream or sys.stderr
    print("=" * 70, file=stream)
    print(title, file=stream)
    print("=" * 70, file=stream)


def print_check_report(df: pd.DataFrame, title: str = "CHECK RESULTS", stream: Optional[TextIO] = None) -> bool:
    """
    Print a PASS/FAIL line per check.

    Returns:
        True if all checks passed
    """
    stream = stream or sys.stderr
    print_banner(title, stream)
    all_passed = bool(df["passed"].all()) if not df.empty else True
    for example, group in df.groupby("example", sort=False):
        if example:
            print(f"\n{example}:", file=stream)
        for _, row in group.iterrows():
            status = "✓ PASS" if row["passed"] else "✗ FAIL"
            print(f"  {status}  {row['check']}", file=stream)
            if not row["passed"]:
                print(f"      expected {row['expected']}", file=stream)
                print(f"      computed {row['computed']}", file=stream)

    print("\n" + "-" * 70, file=stream)
    overall = "ALL CHECKS PASSED ✓" if all_passed else "SOME CHECKS FAILED ✗"
    print(f"OVERALL: {overall} ({int(df['passed'].sum()) if not df.empty else 0}/{len(df)})", file=stream)
    print("=" * 70, file=stream)
    return all_passed


def export_checks_xlsx(df: pd.DataFrame, output_path: Union[str, Path]) -> Path:
    """
    Write the check table to Excel with pass/fail row colouring.

    Sheets: Checks (every row) and Summary (counts per example).
    """
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    summary = (
        df.groupby("example", sort=False)["passed"]
        .agg(total="count", passed="sum")
        .reset_index()
    )

    with pd.ExcelWriter(output_path, engine="openpyxl") as writer:
        df.to_excel(writer, sheet_name="Checks", index=False)
        summary.to_excel(writer, sheet_name="Summary", index=False)

        ws = writer.book["Checks"]
        ncols = len(df.columns)
        for row_idx, passed in enumerate(df["passed"], start=2):  # header is row 1
            fill = PASS_FILL if passed else FAIL_FILL
            for col in range(1, ncols + 1):
                ws.cell(row=row_idx, column=col).fill = fill

    return output_path


def write_report(report: RunReport, stream: Optional[TextIO] = None) -> None:
    (stream or sys.stdout).write(report.to_json() + "\n")
