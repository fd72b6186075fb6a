"""Deterministic artifact writers: CSV traces, summary JSON, text report.

Every float is printed with 12 significant digits and fields keep insertion
order, so identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .regularized import SolveTrace
from .trpo import TRPORun

SOLVE_TRACE_COLUMNS = ("iter", "objective", "gap_or_residual", "step_size")
TRPO_TRACE_COLUMNS = ("iter", "avg_reward", "surrogate", "kl", "alpha", "cg_iters")
RESULT_COLUMNS = ("run", "solver", "eta", "avg_reward", "objective", "gap_or_residual", "iterations", "status")


def fmt(x) -> str:
    if isinstance(x, bool) or x is None:
        return "" if x is None else str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.12g}"
    return str(x)


def _round(obj):
    """Recursively round floats to 12 significant digits for JSON output."""
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else str(obj)
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if hasattr(obj, "tolist"):
        return _round(obj.tolist())
    return obj


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: list[tuple] = field(default_factory=list)

    @classmethod
    def from_trace(cls, trace: SolveTrace) -> "Table":
        return cls(SOLVE_TRACE_COLUMNS,
                   [(r.iter, r.objective, r.gap_or_residual, r.step_size) for r in trace.records])

    @classmethod
    def from_trpo(cls, run: TRPORun) -> "Table":
        return cls(TRPO_TRACE_COLUMNS,
                   [(r.iter, r.avg_reward, r.surrogate, r.kl, r.alpha, r.cg_iters) for r in run.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([fmt(v) for v in row])
        return buf.getvalue()

    def to_json(self) -> str:
        records = [dict(zip(self.columns, _round(list(row)))) for row in self.rows]
        return json.dumps(records, indent=1) + "\n"


@dataclass
class RunResult:
    """One solver invocation: a results-table row plus its traces."""

    name: str
    solver: str
    eta: float | None = None
    avg_reward: float = math.nan
    objective: float = math.nan
    gap_or_residual: float = math.nan
    iterations: int = 0
    status: str = "ok"
    traces: dict[str, Table] = field(default_factory=dict)
    details: dict[str, Any] = field(default_factory=dict)

    def row(self) -> tuple:
        return (self.name, self.solver, self.eta, self.avg_reward, self.objective,
                self.gap_or_residual, self.iterations, self.status)

    def summary(self) -> dict:
        out = dict(zip(RESULT_COLUMNS, self.row()))
        out.update(self.details)
        return out


def render_text(results: Sequence[RunResult], header: dict | None = None) -> str:
    lines = []
    for k, v in (header or {}).items():
        lines.append(f"{k}: {fmt(v)}")
    if lines:
        lines.append("")
    cols = RESULT_COLUMNS
    table = [cols] + [tuple(fmt(v) for v in r.row()) for r in results]
    widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
    for row in table:
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def emit_report(results: Sequence[RunResult], out_dir, header: dict | None = None,
                trace_format: str = "csv") -> list[Path]:
    """Write traces, ``results.csv``, ``summary.json`` and ``report.txt``.

    An empty ``results`` still yields a header-only ``results.csv``.
    """
    if trace_format not in ("csv", "json"):
        raise ValueError("trace_format must be 'csv' or 'json'")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for r in results:
        for label, table in r.traces.items():
            path = out / f"{r.name}.{label}.{trace_format}"
            path.write_text(table.to_csv() if trace_format == "csv" else table.to_json())
            written.append(path)
    results_table = Table(RESULT_COLUMNS, [r.row() for r in results])
    path = out / "results.csv"
    path.write_text(results_table.to_csv())
    written.append(path)
    summary = {"header": _round(header or {}), "runs": [_round(r.summary()) for r in results]}
    path = out / "summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    written.append(path)
    path = out / "report.txt"
    path.write_text(render_text(results, header))
    written.append(path)
    return written
