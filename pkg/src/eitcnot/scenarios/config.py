"""Scenario configuration: a versioned JSON document with strict keys.

Frequencies in the file are in MHz (cycles, converted with 2*pi), lengths in
um, times in us.  Unknown keys are errors.  Example::

    {
      "schema_version": 1,
      "name": "fig3_upper",
      "physics": {"omega_p_mhz": 70.0, "omega_c_ratio": 2.5, "delta_mhz": 1200.0},
      "geometry": {"kind": "square", "d_um": 60.0, "a_um": 5.0},
      "schedule": {"num_targets": 4, "t_gap_us": 1.09, "t_r_us": 0.0166},
      "initial": {"control": "equal_superposition", "targets": "AAAA"},
      "sweeps": [{"axis": "dwell_distance_a", "values": [3, 4, 5]}]
    }
"""

from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from ..observables import FIDELITY_CONVENTIONS
from ..hamiltonian import PhysicalParams, build_model, mhz
from ..transport import Geometry, build_square_geometry, diagonal_hop_length

SCHEMA_VERSION = 1

SWEEP_AXES = ("avg_speed", "dwell_distance_a", "omega_p", "subset_size", "n_cycles")
OBSERVABLES = ("populations", "fidelity", "parity", "renyi2", "mutual_information", "norm")
FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    """Invalid scenario configuration; ``line`` is set when it can be located."""

    def __init__(self, path: str, message: str, line: int | None = None):
        self.path = path
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"{path}: {message}{where}")


@dataclass(frozen=True)
class PhysicsSpec:
    omega_p_mhz: float = 70.0
    omega_c_ratio: float = 2.5
    delta_mhz: float = 1200.0
    tau_r_us: float = 548.0
    tau_p_us: float = 0.0264
    c3_ghz_um3: float = 14.25
    c6_ghz_um6: float = 2036.0
    decay: bool = True


@dataclass(frozen=True)
class GeometrySpec:
    kind: str = "square"
    d_um: float = 60.0
    a_um: float = 5.0
    visit_order: tuple[int, ...] | None = None
    targets: tuple[tuple[float, float], ...] | None = None
    dwell_points: tuple[tuple[float, float], ...] | None = None


@dataclass(frozen=True)
class ScheduleSpec:
    num_targets: int = 4
    n_cycles: int = 1
    t_gap_us: float = 1.09
    t_r_us: float = 0.0166
    # dwell-to-dwell distance used to turn average speed into T_gap
    hop_length_um: float | None = None


@dataclass(frozen=True)
class InitialSpec:
    control: str = "equal_superposition"
    targets: str = "AAAA"


@dataclass(frozen=True)
class FidelitySpec:
    orientation: str = "A"
    renormalize: bool = False
    convention: str = "uhlmann"


@dataclass(frozen=True)
class EntropySpec:
    space: str = "logical"
    subsets: tuple[tuple[int, ...], ...] = ((0,),)


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json", "svg")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    overrides: dict = field(default_factory=dict, compare=True, hash=False)
    label: str = ""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    description: str = ""
    physics: PhysicsSpec = PhysicsSpec()
    geometry: GeometrySpec = GeometrySpec()
    schedule: ScheduleSpec = ScheduleSpec()
    initial: InitialSpec = InitialSpec()
    observables: tuple[str, ...] = ("populations", "fidelity", "renyi2", "norm")
    truth_table: tuple[tuple[str, str], ...] = ()
    track: tuple[tuple[str, str], ...] = ()
    gate_snapshots: bool = False
    fidelity: FidelitySpec = FidelitySpec()
    entropy: EntropySpec = EntropySpec()
    sample_points: int = 2000
    tol: float = 1e-9
    output: OutputSpec = OutputSpec()
    sweeps: tuple[SweepSpec, ...] = ()
    schema_version: int = SCHEMA_VERSION

    # -- derived objects ---------------------------------------------------

    def physical_params(self) -> PhysicalParams:
        ph = self.physics
        om_p = mhz(ph.omega_p_mhz)
        params = PhysicalParams(
            omega_p_peak=om_p,
            omega_c=ph.omega_c_ratio * om_p,
            delta=mhz(ph.delta_mhz),
            gamma_r=1 / ph.tau_r_us,
            gamma_p=1 / ph.tau_p_us,
            c3=mhz(ph.c3_ghz_um3 * 1e3),
            c6=mhz(ph.c6_ghz_um6 * 1e3),
        )
        return params if ph.decay else params.without_decay()

    def build_geometry(self) -> Geometry:
        g = self.geometry
        n = self.schedule.num_targets
        if g.kind == "square":
            return build_square_geometry(g.d_um, g.a_um, g.visit_order, num_targets=n)
        order = g.visit_order or tuple(range(1, n + 1))
        return Geometry(g.targets, g.dwell_points, order, g.a_um, g.d_um)

    def hop_length(self) -> float:
        if self.schedule.hop_length_um is not None:
            return self.schedule.hop_length_um
        return diagonal_hop_length(self.geometry.d_um, self.geometry.a_um)

    def build_model(self):
        s = self.schedule
        return build_model(
            self.physical_params(),
            self.build_geometry(),
            t_r=s.t_r_us,
            t_gap=s.t_gap_us,
            n_cycles=s.n_cycles,
        )

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sweeps"] = [asdict(s) for s in self.sweeps]
        return _jsonable(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def with_overrides(self, overrides: dict) -> ScenarioConfig:
        return config_from_dict(_merge(self.to_dict(), overrides))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _merge(base: dict, overrides: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


# -- parsing -----------------------------------------------------------------

class _Locator:
    """Best-effort mapping from a key path to a line of the source text."""

    def __init__(self, text: str | None):
        self.lines = text.splitlines() if text else []

    def line(self, path: tuple[str, ...]) -> int | None:
        start = 0
        found = None
        for key in path:
            if key.startswith("["):
                continue
            pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
            for i in range(start, len(self.lines)):
                if pattern.search(self.lines[i]):
                    found, start = i + 1, i
                    break
            else:
                return found
        return found


def _fail(loc: _Locator, path: tuple[str, ...], message: str):
    raise ConfigError(".".join(path) or "<root>", message, loc.line(path))


def _number(loc, path, value, *, integer=False, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(loc, path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        _fail(loc, path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        _fail(loc, path, "must be finite")
    if positive and not value > 0:
        _fail(loc, path, f"must be positive, got {value!r}")
    if nonneg and value < 0:
        _fail(loc, path, f"must be non-negative, got {value!r}")
    return int(value) if integer else float(value)


def _section(loc, path, raw, cls, checks):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        _fail(loc, path, "expected an object")
    names = {f.name for f in fields(cls)}
    for key in raw:
        if key not in names:
            _fail(loc, path + (key,), "unknown key")
    values = {}
    for key, value in raw.items():
        check = checks.get(key)
        values[key] = check(path + (key,), value) if check else value
    return cls(**values)


def _point(loc, path, value):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        _fail(loc, path, f"expected an [x, y] pair, got {value!r}")
    return tuple(_number(loc, path, v) for v in value)


def config_from_dict(raw: dict, text: str | None = None) -> ScenarioConfig:
    """Validate and build a :class:`ScenarioConfig`; raises :class:`ConfigError`."""
    loc = _Locator(text)
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "top level must be an object")
    names = {f.name for f in fields(ScenarioConfig)}
    for key in raw:
        if key not in names:
            _fail(loc, (key,), "unknown key")
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        _fail(loc, ("schema_version",), f"expected schema_version {SCHEMA_VERSION}, got {version!r}")

    num = lambda **kw: (lambda p, v: _number(loc, p, v, **kw))  # noqa: E731

    def boolean(p, v):
        if not isinstance(v, bool):
            _fail(loc, p, f"expected true/false, got {v!r}")
        return v

    def string(p, v):
        if not isinstance(v, str):
            _fail(loc, p, f"expected a string, got {v!r}")
        return v

    physics = _section(loc, ("physics",), raw.get("physics"), PhysicsSpec, {
        "omega_p_mhz": num(positive=True),
        "omega_c_ratio": num(nonneg=True),
        "delta_mhz": num(positive=True),
        "tau_r_us": num(positive=True),
        "tau_p_us": num(positive=True),
        "c3_ghz_um3": num(positive=True),
        "c6_ghz_um6": num(positive=True),
        "decay": boolean,
    })

    def kind(p, v):
        if v not in ("square", "explicit"):
            _fail(loc, p, f"kind must be 'square' or 'explicit', got {v!r}")
        return v

    def order(p, v):
        if v is None:
            return None
        if not isinstance(v, (list, tuple)):
            _fail(loc, p, "expected a list of target numbers")
        return tuple(_number(loc, p, x, integer=True, positive=True) for x in v)

    def points(p, v):
        if v is None:
            return None
        if not isinstance(v, (list, tuple)) or not v:
            _fail(loc, p, "expected a non-empty list of [x, y] points")
        return tuple(_point(loc, p, x) for x in v)

    geometry = _section(loc, ("geometry",), raw.get("geometry"), GeometrySpec, {
        "kind": kind,
        "d_um": num(positive=True),
        "a_um": num(positive=True),
        "visit_order": order,
        "targets": points,
        "dwell_points": points,
    })

    def hop(p, v):
        return None if v is None else _number(loc, p, v, positive=True)

    schedule = _section(loc, ("schedule",), raw.get("schedule"), ScheduleSpec, {
        "num_targets": num(integer=True, positive=True),
        "n_cycles": num(integer=True, positive=True),
        "t_gap_us": num(positive=True),
        "t_r_us": num(positive=True),
        "hop_length_um": hop,
    })
    initial = _section(loc, ("initial",), raw.get("initial"), InitialSpec, {
        "control": string, "targets": string,
    })

    def orientation(p, v):
        if v not in ("A", "B"):
            _fail(loc, p, f"orientation must be 'A' or 'B', got {v!r}")
        return v

    def convention(p, v):
        if v not in FIDELITY_CONVENTIONS:
            _fail(loc, p, f"convention must be one of {', '.join(FIDELITY_CONVENTIONS)}, got {v!r}")
        return v

    fidelity = _section(loc, ("fidelity",), raw.get("fidelity"), FidelitySpec, {
        "orientation": orientation, "renormalize": boolean, "convention": convention,
    })

    def space(p, v):
        if v not in ("logical", "full"):
            _fail(loc, p, f"space must be 'logical' or 'full', got {v!r}")
        return v

    def subsets(p, v):
        if not isinstance(v, (list, tuple)):
            _fail(loc, p, "expected a list of subsystem lists")
        return tuple(tuple(_number(loc, p, x, integer=True, nonneg=True) for x in s) for s in v)

    entropy = _section(loc, ("entropy",), raw.get("entropy"), EntropySpec, {
        "space": space, "subsets": subsets,
    })

    def formats(p, v):
        if isinstance(v, str):
            v = [x.strip() for x in v.split(",") if x.strip()]
        if not isinstance(v, (list, tuple)):
            _fail(loc, p, "expected a list of formats")
        for f in v:
            if f not in FORMATS:
                _fail(loc, p, f"unknown format {f!r}; choose from {', '.join(FORMATS)}")
        return tuple(v)

    output = _section(loc, ("output",), raw.get("output"), OutputSpec, {
        "dir": string, "formats": formats,
    })

    observables = tuple(raw.get("observables", ScenarioConfig.observables))
    for ob in observables:
        if ob not in OBSERVABLES:
            _fail(loc, ("observables",), f"unknown observable {ob!r}")

    def pairs(key):
        value = raw.get(key, ())
        if not isinstance(value, (list, tuple)):
            _fail(loc, (key,), "expected a list of [control, targets] pairs")
        out = []
        for item in value:
            if not isinstance(item, (list, tuple)) or len(item) != 2 or not all(isinstance(x, str) for x in item):
                _fail(loc, (key,), f"expected [control, targets], got {item!r}")
            out.append(tuple(item))
        return tuple(out)

    sweeps = []
    raw_sweeps = raw.get("sweeps", ())
    if not isinstance(raw_sweeps, (list, tuple)):
        _fail(loc, ("sweeps",), "expected a list")
    for i, s in enumerate(raw_sweeps):
        sweeps.append(_sweep(loc, ("sweeps", f"[{i}]"), s))

    cfg = ScenarioConfig(
        name=string(("name",), raw.get("name", "custom")),
        description=string(("description",), raw.get("description", "")),
        physics=physics,
        geometry=geometry,
        schedule=schedule,
        initial=initial,
        observables=observables,
        truth_table=pairs("truth_table"),
        track=pairs("track"),
        gate_snapshots=boolean(("gate_snapshots",), raw.get("gate_snapshots", False)),
        fidelity=fidelity,
        entropy=entropy,
        sample_points=_number(loc, ("sample_points",), raw.get("sample_points", 2000), integer=True, positive=True),
        tol=_number(loc, ("tol",), raw.get("tol", 1e-9), positive=True),
        output=output,
        sweeps=tuple(sweeps),
        schema_version=version,
    )
    _check_consistency(cfg, loc)
    return cfg


def _sweep(loc, path, raw) -> SweepSpec:
    if not isinstance(raw, dict):
        _fail(loc, path, "expected an object")
    for key in raw:
        if key not in ("axis", "values", "overrides", "label"):
            _fail(loc, path + (key,), "unknown key")
    axis = raw.get("axis")
    if axis not in SWEEP_AXES:
        _fail(loc, path + ("axis",), f"unknown axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    values = raw.get("values")
    if not isinstance(values, (list, tuple)) or not values:
        _fail(loc, path + ("values",), "expected a non-empty list of numbers")
    integer = axis in ("subset_size", "n_cycles")
    values = tuple(_number(loc, path + ("values",), v, integer=integer, nonneg=integer) for v in values)
    check_monotone(values, lambda msg: _fail(loc, path + ("values",), msg))
    overrides = raw.get("overrides", {})
    if not isinstance(overrides, dict):
        _fail(loc, path + ("overrides",), "expected an object")
    label = raw.get("label", "")
    if not isinstance(label, str):
        _fail(loc, path + ("label",), "expected a string")
    return SweepSpec(axis, values, overrides, label)


def sweep_from_dict(raw: dict) -> SweepSpec:
    return _sweep(_Locator(None), ("sweep",), raw)


def check_monotone(values, fail):
    diffs = [b - a for a, b in zip(values[:-1], values[1:])]
    if not (all(d > 0 for d in diffs) or all(d < 0 for d in diffs)):
        fail("axis values must be strictly monotone")


def _check_consistency(cfg: ScenarioConfig, loc: _Locator):
    s = cfg.schedule
    if s.num_targets > 1 and s.n_cycles > 1:
        _fail(loc, ("schedule", "n_cycles"), "repeated cycles require num_targets = 1")
    if len(cfg.initial.targets) != s.num_targets:
        _fail(loc, ("initial", "targets"), f"expected {s.num_targets} target labels")
    g = cfg.geometry
    if g.kind == "square":
        if s.num_targets > 4:
            _fail(loc, ("schedule", "num_targets"), "square geometry holds at most 4 targets")
        if not g.a_um < g.d_um / 2:
            _fail(loc, ("geometry", "a_um"), "dwell distance must be below d/2")
    else:
        if g.targets is None or g.dwell_points is None:
            _fail(loc, ("geometry",), "explicit geometry needs targets and dwell_points")
        if len(g.targets) != s.num_targets or len(g.dwell_points) != s.num_targets:
            _fail(loc, ("geometry", "targets"), "need one target and dwell point per target atom")
    for pair_key in ("truth_table", "track"):
        for control, targets in getattr(cfg, pair_key):
            if len(targets) != s.num_targets:
                _fail(loc, (pair_key,), f"{targets!r} does not have {s.num_targets} labels")
    for sub in cfg.entropy.subsets:
        if any(k > s.num_targets for k in sub):
            _fail(loc, ("entropy", "subsets"), f"subset {list(sub)} out of range")
    if not 1e-12 <= cfg.tol <= 1e-6:
        _fail(loc, ("tol",), "tol must lie in [1e-12, 1e-6]")
    if cfg.sample_points < 2:
        _fail(loc, ("sample_points",), "need at least 2 sample points")
    try:
        cfg.build_geometry()
    except ValueError as exc:
        _fail(loc, ("geometry",), str(exc))


def loads(text: str) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<json>", exc.msg, exc.lineno) from None
    return config_from_dict(raw, text)


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from None
    return loads(text)


def with_sweeps(cfg: ScenarioConfig, sweeps) -> ScenarioConfig:
    return replace(cfg, sweeps=tuple(sweeps))
