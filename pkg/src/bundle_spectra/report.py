"""Report records and their CSV/JSON serialization."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

from .verify import VerdictRow

__all__ = ["CaseReport", "Report", "emit_report", "write_report", "CSV_HEADER"]

CSV_HEADER = ("case_id", "check_id", "lambda", "lhs", "rhs_log10", "slack_log10", "pass")


@dataclass
class CaseReport:
    case_id: str
    config: dict
    constants: dict
    eigenvalues: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    convergence: dict | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "config": self.config,
            "constants": self.constants,
            "eigenvalues": self.eigenvalues,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "diagnostics": self.diagnostics,
            "convergence": self.convergence,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseReport":
        return cls(
            case_id=d["case_id"],
            config=d["config"],
            constants=d["constants"],
            eigenvalues=d["eigenvalues"],
            verdicts=[VerdictRow.from_dict(v) for v in d["verdicts"]],
            diagnostics=d["diagnostics"],
            convergence=d["convergence"],
        )


@dataclass
class Report:
    command: str
    cases: list = field(default_factory=list)
    status: str = "ok"

    @property
    def verdicts(self) -> list:
        return [(c.case_id, v) for c in self.cases for v in c.verdicts]

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(c.passed for c in self.cases)

    def to_dict(self) -> dict:
        return {"command": self.command, "status": self.status, "cases": [c.to_dict() for c in self.cases]}

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(command=d["command"], cases=[CaseReport.from_dict(c) for c in d["cases"]], status=d["status"])


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".17g")


def emit_report(report: Report, fmt: str) -> bytes:
    """Serialize a report. JSON carries everything; CSV carries the verdict table."""
    if fmt == "json":
        return (json.dumps(report.to_dict(), indent=2) + "\n").encode("utf-8")
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for case_id, row in report.verdicts:
        writer.writerow([
            case_id,
            row.check_id,
            _fmt(row.context.get("lambda")),
            _fmt(row.lhs),
            _fmt(row.rhs_log10),
            _fmt(row.slack_log10),
            "true" if row.passed else "false",
        ])
    return buf.getvalue().encode("utf-8")


def write_report(report: Report, fmt: str, path: str) -> None:
    data = emit_report(report, fmt)
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report to {path}: {exc.strerror}") from exc
