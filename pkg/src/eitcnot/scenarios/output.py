"""Writers for scenario results: CSV tables, a JSON document, static SVG charts.

CSV layout (UTF-8, header row, full ``repr`` precision):

* ``<name>_series.csv``: ``t_us`` then one column per tracked observable.
* ``<name>_truth<k>.csv``: ``initial`` then one column per logical final state.
* ``<name>_snapshots.csv``: same layout, one row per gate window.
* ``<name>_sweep<k>.csv``: the axis value, ``fidelity`` and any entropy or
  population columns, then ``error`` (empty on success).

The JSON file mirrors everything, including the config and the run summary.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .runner import ScenarioResult, SweepResult

SVG_METADATA = {"Date": None, "Creator": None}


class OutputError(OSError):
    pass


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows) -> Path:
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_cell(v) for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def sweep_columns(sweep: SweepResult) -> list[str]:
    """Axis first, fidelity second, then the remaining keys in first-seen order."""
    cols = [sweep.axis]
    if any("fidelity" in r for r in sweep.rows):
        cols.append("fidelity")
    for row in sweep.rows:
        for key in row:
            if key not in cols and key != "error":
                cols.append(key)
    return cols + ["error"]


def _json_value(obj):
    if isinstance(obj, dict):
        return {str(k): _json_value(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_value(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_value(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def result_document(result: ScenarioResult) -> dict:
    doc = {"config": result.config.to_dict(), "summary": result.summary}
    if result.series is not None:
        doc["series"] = {"t_us": result.series.times, **result.series.columns}
    doc["truth_tables"] = [
        {"initial": t.initial_labels, "final": t.final_labels, "probabilities": t.probabilities}
        for t in result.truth_tables
    ]
    if result.snapshots is not None:
        s = result.snapshots
        doc["snapshots"] = {"window": s.initial_labels, "final": s.final_labels, "probabilities": s.probabilities}
    doc["sweeps"] = [{"axis": s.axis, "label": s.label, "rows": s.rows} for s in result.sweeps]
    return _json_value(doc)


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "eitcnot"
    return plt


def _save(fig, path: Path, plt) -> Path:
    try:
        fig.savefig(path, format="svg", metadata=SVG_METADATA)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
    finally:
        plt.close(fig)
    return path


def _plot_series(result: ScenarioResult, path: Path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 4))
    for name, col in result.series.columns.items():
        ax.plot(result.series.times, col, label=name, lw=1.2)
    ax.set_xlabel("t (us)")
    ax.set_ylabel("value")
    ax.set_title(result.config.name)
    if result.series.columns:
        ax.legend(fontsize=7, loc="best")
    fig.tight_layout()
    return _save(fig, path, plt)


def _plot_table(table, path: Path, title: str) -> Path:
    plt = _plt()
    probs = np.asarray(table.probabilities)
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * probs.shape[1]), 1.2 + 0.5 * probs.shape[0]))
    im = ax.imshow(probs, vmin=0, vmax=1, cmap="viridis", aspect="auto")
    ax.set_xticks(range(probs.shape[1]), table.final_labels, rotation=90, fontsize=6)
    ax.set_yticks(range(probs.shape[0]), table.initial_labels, fontsize=7)
    ax.set_title(title)
    fig.colorbar(im, ax=ax, label="probability")
    fig.tight_layout()
    return _save(fig, path, plt)


def _plot_sweep(sweep: SweepResult, path: Path, title: str) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.array(sweep.values, dtype=float)
    cols = [c for c in sweep_columns(sweep)[1:-1]
            if c == "fidelity" or c.startswith("S2") or c.startswith("I[") or c == "mutual_information"]
    for c in cols:
        ax.plot(x, sweep.column(c), "o-", label=c, ms=3)
    ax.set_xlabel(sweep.axis)
    ax.set_title(f"{title} {sweep.label}".strip())
    if cols:
        ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path, plt)


def emit_outputs(result: ScenarioResult, out_dir, formats=("csv", "json", "svg")) -> list[Path]:
    """Write the requested formats under ``out_dir``; returns the written paths."""
    if result.series is None and not result.sweeps and not result.truth_tables:
        raise ValueError("nothing to write: result is empty")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {out}: {exc.strerror}") from exc
    name = result.config.name
    written: list[Path] = []
    tables = [(f"truth{k}", t) for k, t in enumerate(result.truth_tables, 1)]
    if result.snapshots is not None:
        tables.append(("snapshots", result.snapshots))

    if "csv" in formats:
        if result.series is not None:
            cols = list(result.series.columns)
            rows = zip(result.series.times, *(result.series.columns[c] for c in cols))
            written.append(_write_csv(out / f"{name}_series.csv", ["t_us"] + cols, rows))
        for tag, t in tables:
            rows = ([label, *row] for label, row in zip(t.initial_labels, t.probabilities))
            written.append(_write_csv(out / f"{name}_{tag}.csv", ["initial"] + list(t.final_labels), rows))
        for k, s in enumerate(result.sweeps, 1):
            cols = sweep_columns(s)
            rows = ([r.get(c, "") for c in cols] for r in s.rows)
            written.append(_write_csv(out / f"{name}_sweep{k}.csv", cols, rows))

    if "json" in formats:
        path = out / f"{name}.json"
        try:
            path.write_text(json.dumps(result_document(result), indent=1) + "\n", encoding="utf-8")
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
        written.append(path)

    if "svg" in formats:
        if result.series is not None:
            written.append(_plot_series(result, out / f"{name}_series.svg"))
        for tag, t in tables:
            written.append(_plot_table(t, out / f"{name}_{tag}.svg", f"{name} {tag}"))
        for k, s in enumerate(result.sweeps, 1):
            written.append(_plot_sweep(s, out / f"{name}_sweep{k}.svg", name))
    return written
