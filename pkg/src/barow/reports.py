"""Report files written by the CLI and the model comparison table."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from .backtest import BacktestReport, Metrics
from .data import format_float
from .errors import ParseError

NA = "NA"
METRIC_FIELDS = ("total_return", "sharpe", "max_dd", "calmar")


def make_manifest(config: dict, config_path=None, timestamp: str | None = None) -> dict:
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    return {
        "tool_version": __version__,
        "config_path": None if config_path is None else str(config_path),
        "timestamp": timestamp,
        "config": config,
    }


def dump_yaml(obj: dict) -> str:
    return yaml.safe_dump(obj, sort_keys=False, default_flow_style=False, width=1000)


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(dump_yaml({"manifest": manifest}), encoding="utf-8")


def _opt(x: float | None) -> float | None:
    return None if x is None else float(x)


def write_report_yaml(path, name: str, report: BacktestReport, manifest: dict) -> None:
    m = report.metrics
    doc = {
        "manifest": manifest,
        "model": name,
        "label": report.model_label,
        "metrics": {f: _opt(getattr(m, f)) for f in METRIC_FIELDS},
        "series": {
            "date": [str(d) for d in report.dates],
            "ic": [float(v) for v in report.daily_ic],
            "return": [float(v) for v in report.daily_return],
            "equity": [float(v) for v in report.equity],
        },
    }
    Path(path).write_text(dump_yaml(doc), encoding="utf-8")


def write_daily_csv(path, report: BacktestReport) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "ic", "return", "equity"])
        for d, ic, r, e in zip(report.dates, report.daily_ic, report.daily_return, report.equity):
            w.writerow([str(d), format_float(ic), format_float(r), format_float(e)])


def _fmt_metric(x: float | None) -> str:
    return NA if x is None else format_float(x)


def write_metrics_csv(path, rows: Sequence[tuple[str, Metrics]]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", *METRIC_FIELDS])
        for label, m in rows:
            w.writerow([label, *(_fmt_metric(getattr(m, f)) for f in METRIC_FIELDS)])


def _parse_metric(text, field: str, row: int | None) -> float | None:
    if text is None or text == NA:
        return None
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"non-numeric {field} {text!r}", row) from None
    return None if math.isnan(v) else v


def read_metrics(path) -> list[tuple[str, Metrics]]:
    """Rows from a metrics CSV or the single model of a report YAML."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    if path.suffix.lower() == ".csv":
        rows = list(csv.reader(text.splitlines()))
        if not rows or rows[0] != ["model", *METRIC_FIELDS]:
            raise ParseError(f"{path}: header must be model,{','.join(METRIC_FIELDS)}", 1)
        out = []
        for i, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ParseError(f"{path}: expected 5 fields", i)
            vals = [_parse_metric(v, f, i) for v, f in zip(row[1:], METRIC_FIELDS)]
            if vals[0] is None or vals[2] is None:
                raise ParseError(f"{path}: total_return and max_dd are required", i)
            out.append((row[0], Metrics(*vals)))
        return out
    try:
        doc = yaml.safe_load(text)
        label = str(doc.get("label") or doc["model"])
        vals = [_parse_metric(doc["metrics"][f], f, None) for f in METRIC_FIELDS]
    except (yaml.YAMLError, AttributeError, KeyError, TypeError) as exc:
        raise ParseError(f"{path}: not a report file ({exc})") from None
    if vals[0] is None or vals[2] is None:
        raise ParseError(f"{path}: total_return and max_dd are required")
    return [(label, Metrics(*vals))]


@dataclass(frozen=True)
class _Column:
    title: str
    field: str
    fmt: str


_COLUMNS = (
    _Column("Return", "total_return", "pct1"),
    _Column("Sharpe", "sharpe", "f1"),
    _Column("MaxDD", "max_dd", "pct2"),
    _Column("Calmar", "calmar", "g3"),
)


def _render(x: float | None, fmt: str) -> str:
    if x is None:
        return NA
    if fmt == "pct1":
        return f"{100 * x:.1f}%"
    if fmt == "pct2":
        return f"{100 * x:.2f}%"
    if fmt == "f1":
        return f"{x:.1f}"
    return f"{x:.3g}"


def compare_table(rows: Sequence[tuple[str, Metrics]]) -> list[list[str]]:
    """Rendered cells per model; the best value per column gets a trailing ``*``.

    Higher is better in every column (for MaxDD, closer to zero). Ties go
    to the earliest row.
    """
    table = [[label] + [_render(getattr(m, c.field), c.fmt) for c in _COLUMNS] for label, m in rows]
    for j, c in enumerate(_COLUMNS, start=1):
        best_i, best = None, None
        for i, (_, m) in enumerate(rows):
            v = getattr(m, c.field)
            if v is not None and (best is None or v > best):
                best_i, best = i, v
        if best_i is not None:
            table[best_i][j] += "*"
    return table


def format_compare(rows: Sequence[tuple[str, Metrics]]) -> str:
    header = ["model"] + [c.title for c in _COLUMNS]
    body = compare_table(rows)
    widths = [max(len(r[j]) for r in [header, *body]) for j in range(len(header))]
    lines = []
    for r in [header, *body]:
        lines.append("  ".join(cell.ljust(w) if j == 0 else cell.rjust(w) for j, (cell, w) in enumerate(zip(r, widths))))
    return "\n".join(lines)


def write_tune_csv(path, table) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "total_return", "sharpe"])
        for r, m in table:
            w.writerow([format_float(r), format_float(m.total_return), _fmt_metric(m.sharpe)])
