"""Result rows and their CSV and plot-data serializations."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path

__all__ = ["CSV_HEADER", "ResultRow", "emit_csv", "emit_plot_data", "format_rows", "parse_csv"]

CSV_HEADER = ("sweep_var", "value", "metric", "variant", "mean", "stderr", "trials", "seed", "config_hash")


@dataclass(frozen=True)
class ResultRow:
    """Summary of one metric for one variant at one sweep value."""

    sweep_var: str
    value: float
    metric: str
    variant: str
    mean: float
    stderr: float
    trials: int
    seed: int
    config_hash: str


def _num(x: float) -> str:
    # 17 significant digits round-trip any double
    return format(float(x), ".17g")


def format_rows(rows) -> str:
    """CSV text of ``rows`` with a header line."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.sweep_var, _num(r.value), r.metric, r.variant, _num(r.mean), _num(r.stderr),
                    int(r.trials), int(r.seed), r.config_hash])
    return buf.getvalue()


def _write(path, text: str) -> Path:
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_csv(rows, path) -> Path:
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    return _write(path, format_rows(rows))


def parse_csv(path) -> list[ResultRow]:
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [ResultRow(d["sweep_var"], float(d["value"]), d["metric"], d["variant"], float(d["mean"]),
                          float(d["stderr"]), int(d["trials"]), int(d["seed"]), d["config_hash"])
                for d in reader]


def emit_plot_data(rows, path) -> Path:
    """JSON grouped as ``metric -> variant -> {x, mean, stderr, trials}``."""
    rows = list(rows)
    if not rows:
        raise ValueError("no rows to write")
    series: dict = {}
    for r in rows:
        s = series.setdefault(r.metric, {}).setdefault(r.variant, {"x": [], "mean": [], "stderr": [], "trials": []})
        s["x"].append(r.value)
        s["mean"].append(r.mean)
        s["stderr"].append(r.stderr)
        s["trials"].append(r.trials)
    first = asdict(rows[0])
    doc = {"sweep_var": first["sweep_var"], "seed": first["seed"], "config_hash": first["config_hash"],
           "series": series}
    return _write(path, json.dumps(doc, indent=1, sort_keys=True, allow_nan=True) + "\n")
