"""Scenario execution and parameter sweeps."""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ..hilbert import LeakedStateError, prepare_initial
from ..observables import (
    TruthTable,
    ghz_fidelity,
    initial_label,
    logical_populations,
    mutual_information,
    norm_deficit,
    parity,
    renyi2,
    subset_of_size,
    truth_table,
)
from ..propagate import NumericalError, evolve
from .config import ScenarioConfig, SweepSpec, check_monotone

log = logging.getLogger(__name__)

WORKERS_ENV = "EITCNOT_WORKERS"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class Series:
    """Time series of observables; ``columns`` maps a name to one value per time."""

    times: np.ndarray
    columns: dict[str, np.ndarray]


@dataclass
class SweepResult:
    axis: str
    label: str
    rows: list[dict]

    @property
    def values(self) -> list[float]:
        return [row[self.axis] for row in self.rows]

    def column(self, name: str) -> np.ndarray:
        return np.array([row.get(name, np.nan) for row in self.rows], dtype=float)


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    series: Series | None = None
    summary: dict = field(default_factory=dict)
    truth_tables: list[TruthTable] = field(default_factory=list)
    snapshots: TruthTable | None = None
    sweeps: list[SweepResult] = field(default_factory=list)


def _subset_name(subset) -> str:
    return "S2[" + ",".join(str(k) for k in subset) + "]"


def _fidelity(cfg: ScenarioConfig, state) -> float:
    f = cfg.fidelity
    return ghz_fidelity(state, f.orientation, f.renormalize, f.convention)


def final_observables(cfg: ScenarioConfig, state) -> dict:
    """Scalar observables of one final state, keyed by CSV column name."""
    scheme = state.scheme
    n = scheme.num_targets
    out = {"norm_deficit": norm_deficit(state)}
    obs = set(cfg.observables)
    cycles_even = cfg.schedule.n_cycles % 2 == 0
    if "fidelity" in obs:
        # an even number of cycles undoes the CNOT, so no Bell/GHZ target applies
        out["fidelity"] = (
            float("nan") if cycles_even
            else _fidelity(cfg, state)
        )
    if "parity" in obs and n == 1:
        out["parity"] = parity(state)
    if "populations" in obs:
        pops = logical_populations(state)
        for (c, t), p in zip(scheme.logical_labels(), pops):
            out[f"P[{c},{t}]"] = float(p)
    space = cfg.entropy.space
    try:
        if "renyi2" in obs:
            out["S2_AB"] = renyi2(state, range(n + 1), space)
            for sub in cfg.entropy.subsets:
                out[_subset_name(sub)] = renyi2(state, sub, space)
        if "mutual_information" in obs:
            for size in range(1, n + 1):
                out[f"I[{size}]"] = mutual_information(state, subset_of_size(scheme, size), space)
    except LeakedStateError:
        log.warning("state fully leaked; entropies left undefined")
    return out


def _series(cfg: ScenarioConfig, evolution) -> Series:
    model = evolution.model
    scheme = model.scheme
    obs = set(cfg.observables)
    cols: dict[str, list] = {}

    def put(name, value):
        cols.setdefault(name, []).append(value)

    for i in range(len(evolution.times)):
        amps = evolution.states[i]
        norm2 = float(np.vdot(amps, amps).real)
        state = evolution.state(i)
        if "norm" in obs:
            put("norm", norm2)
        for control, targets in cfg.track:
            put(f"P[{control},{targets}]", float(abs(amps[scheme.composite_index(control, targets)]) ** 2))
        if "fidelity" in obs:
            put("fidelity", _fidelity(cfg, state))
        if "parity" in obs and scheme.num_targets == 1:
            put("parity", parity(state))
        if "renyi2" in obs:
            for sub in cfg.entropy.subsets:
                try:
                    val = renyi2(state, sub, cfg.entropy.space)
                except LeakedStateError:
                    val = float("nan")
                put(_subset_name(sub), val)
    return Series(evolution.times, {k: np.array(v) for k, v in cols.items()})


def _snapshots(cfg: ScenarioConfig, model, psi0, tol) -> TruthTable:
    """Logical populations at the end of each gate window."""
    ends = [model.table.window(w)[1] for w in range(1, model.table.num_windows + 1)]
    ev = evolve(psi0, model, tol=tol, sample_grid=ends)
    finals = [f"|{c},{t}>" for c, t in model.scheme.logical_labels()]
    rows = np.array([logical_populations(ev.state(i)) for i in range(len(ends))])
    labels = [f"after gate {w}" for w in range(1, len(ends) + 1)]
    return TruthTable(labels, finals, rows)


def run_scenario(cfg: ScenarioConfig, workers: int | None = None, tol: float | None = None,
                 include_sweeps: bool = True) -> ScenarioResult:
    """Run the base configuration, its truth tables and (optionally) its sweeps."""
    tol = cfg.tol if tol is None else tol
    started = time.perf_counter()
    model = cfg.build_model()
    psi0 = prepare_initial(model.scheme, cfg.initial.control, cfg.initial.targets)
    ev = evolve(psi0, model, tol=tol, sample_grid=cfg.sample_points)
    result = ScenarioResult(cfg)
    result.series = _series(cfg, ev)
    summary = {
        "scenario": cfg.name,
        "initial": initial_label(cfg.initial.control, cfg.initial.targets),
        "duration_us": model.table.duration,
        "t_p_us": model.table.t_p,
        "n_steps": ev.n_steps,
        "n_rejected": ev.n_rejected,
        "final_norm": ev.final.norm2,
    }
    summary.update(final_observables(cfg, ev.final))
    if cfg.truth_table:
        result.truth_tables.append(truth_table(model, list(cfg.truth_table), tol=tol))
    if cfg.gate_snapshots:
        result.snapshots = _snapshots(cfg, model, psi0, tol)
    if include_sweeps:
        for sweep in cfg.sweeps:
            result.sweeps.append(run_sweep(cfg, sweep, workers=workers, tol=tol))
    summary["wall_clock_s"] = time.perf_counter() - started
    result.summary = summary
    return result


def point_config(cfg: ScenarioConfig, sweep: SweepSpec, value: float) -> ScenarioConfig:
    base = cfg.with_overrides(sweep.overrides) if sweep.overrides else cfg
    axis = sweep.axis
    if axis == "dwell_distance_a":
        return base.with_overrides({"geometry": {"a_um": float(value)}})
    if axis == "omega_p":
        return base.with_overrides({"physics": {"omega_p_mhz": float(value)}})
    if axis == "n_cycles":
        if int(value) != value or value < 1:
            raise ValueError(f"n_cycles must be a positive integer, got {value}")
        return base.with_overrides({"schedule": {"n_cycles": int(value)}})
    if axis == "avg_speed":
        if not value > 0:
            raise ValueError("average speed must be positive")
        return base.with_overrides({"schedule": {"t_gap_us": base.hop_length() / float(value)}})
    if axis == "subset_size":
        return base
    raise ValueError(f"unknown sweep axis {axis!r}")


def _final_state(cfg: ScenarioConfig, tol: float):
    model = cfg.build_model()
    psi0 = prepare_initial(model.scheme, cfg.initial.control, cfg.initial.targets)
    return evolve(psi0, model, tol=tol, sample_grid=2).final


def _run_point(cfg: ScenarioConfig, sweep: SweepSpec, tol: float, value: float) -> dict:
    row = {sweep.axis: value}
    try:
        pcfg = point_config(cfg, sweep, value)
        if sweep.axis == "avg_speed":
            row["t_gap_us"] = pcfg.schedule.t_gap_us
        state = _final_state(pcfg, tol)
        row.update(final_observables(pcfg, state))
        row["error"] = ""
    except (ValueError, NumericalError, LeakedStateError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _subset_rows(cfg: ScenarioConfig, sweep: SweepSpec, tol: float) -> list[dict]:
    # one evolution serves every subset size
    base = cfg.with_overrides(sweep.overrides) if sweep.overrides else cfg
    try:
        state = _final_state(base, tol)
    except (ValueError, NumericalError) as exc:
        return [{"subset_size": v, "error": f"{type(exc).__name__}: {exc}"} for v in sweep.values]
    rows = []
    for value in sweep.values:
        row = {"subset_size": value}
        try:
            subset = subset_of_size(state.scheme, int(value))
            space = base.entropy.space
            row["mutual_information"] = mutual_information(state, subset, space)
            row["S2_A"] = renyi2(state, subset, space)
            row["fidelity"] = _fidelity(base, state)
            row["norm_deficit"] = norm_deficit(state)
            row["error"] = ""
        except (ValueError, LeakedStateError) as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def run_sweep(cfg: ScenarioConfig, sweep: SweepSpec, workers: int | None = None,
              tol: float | None = None) -> SweepResult:
    """One row per axis value; points are independent and may run in parallel."""
    tol = cfg.tol if tol is None else tol
    check_monotone(sweep.values, lambda msg: (_ for _ in ()).throw(ValueError(msg)))
    if sweep.axis == "subset_size":
        return SweepResult(sweep.axis, sweep.label, _subset_rows(cfg, sweep, tol))
    workers = default_workers() if workers is None else workers
    job = partial(_run_point, cfg, sweep, tol)
    if workers > 1 and len(sweep.values) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, sweep.values))
    else:
        rows = [job(v) for v in sweep.values]
    # keyed merge: row order follows the axis values regardless of completion order
    by_value = {row[sweep.axis]: row for row in rows}
    return SweepResult(sweep.axis, sweep.label, [by_value[v] for v in sweep.values])
