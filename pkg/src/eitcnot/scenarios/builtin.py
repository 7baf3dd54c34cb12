"""Built-in scenarios, one per reproduced figure."""

from __future__ import annotations

from ..hilbert import EQUAL_SUPERPOSITION
from ..transport import DEFAULT_VISIT_ORDER
from .config import SCHEMA_VERSION, ScenarioConfig, config_from_dict

_BASE = {
    "schema_version": SCHEMA_VERSION,
    "physics": {"omega_p_mhz": 70.0, "omega_c_ratio": 2.5, "delta_mhz": 1200.0},
    "geometry": {"kind": "square", "d_um": 60.0, "a_um": 5.0},
    "schedule": {"num_targets": 4, "n_cycles": 1, "t_gap_us": 1.09, "t_r_us": 0.0166},
    "initial": {"control": EQUAL_SUPERPOSITION, "targets": "AAAA"},
    "sample_points": 2000,
    "tol": 1e-9,
}


def _route(visit_order, start="A", flip="B"):
    """Staircase of |1>/|r> states as the control flips targets in visit order."""
    n = len(visit_order)
    labels = [start] * n
    route = [("g1", "".join(labels)), ("ryd", "".join(labels))]
    for target in visit_order:
        labels[target - 1] = flip
        route += [("ryd", "".join(labels)), ("g1", "".join(labels))]
    # keep first occurrence only
    seen, out = set(), []
    for item in route:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def _fig2():
    cycles = [1, 3, 5, 7, 9]
    return {
        **_BASE,
        "name": "fig2_cycles",
        "description": "Single target, repeated CNOT cycles: populations, Bell fidelity and parity vs n",
        "schedule": {**_BASE["schedule"], "num_targets": 1},
        "initial": {"control": EQUAL_SUPERPOSITION, "targets": "A"},
        "observables": ["populations", "fidelity", "parity", "renyi2", "norm"],
        "track": [["g0", "A"], ["g0", "B"], ["g1", "A"], ["g1", "B"]],
        "sweeps": [
            {"axis": "n_cycles", "values": cycles, "label": "omega_p=70MHz"},
            {"axis": "n_cycles", "values": cycles, "label": "omega_p=90MHz",
             "overrides": {"physics": {"omega_p_mhz": 90.0}}},
        ],
    }


def _fig3(lower: bool):
    start, flip = ("B", "A") if lower else ("A", "B")
    targets = start * 4
    return {
        **_BASE,
        "name": "fig3_lower" if lower else "fig3_upper",
        "description": f"GHZ generation from (|0>+|1>)|{targets}>: truth table and gate snapshots",
        "initial": {"control": EQUAL_SUPERPOSITION, "targets": targets},
        "observables": ["populations", "fidelity", "renyi2", "mutual_information", "norm"],
        "fidelity": {"orientation": start, "renormalize": False},
        "truth_table": [["g0", targets], ["g1", targets], [EQUAL_SUPERPOSITION, targets]],
        "track": [["g0", targets], ["g1", targets], ["g1", flip * 4]],
        "gate_snapshots": True,
    }


def _fig4():
    route = _route(DEFAULT_VISIT_ORDER)
    return {
        **_BASE,
        "name": "fig4_route",
        "description": "Population route |1,AAAA> -> |1,BBBB> through the Rydberg and swap steps",
        "initial": {"control": "g1", "targets": "AAAA"},
        "observables": ["populations", "norm"],
        "track": [list(item) for item in route],
    }


def _fig5a():
    speeds = [10.0 * k for k in range(1, 11)]
    return {
        **_BASE,
        "name": "fig5a_speed",
        "description": "GHZ fidelity and Renyi entropy vs average transport speed",
        "observables": ["fidelity", "renyi2", "norm"],
        "sweeps": [{"axis": "avg_speed", "values": speeds, "label": "omega_p=70MHz"}],
    }


def _fig5b():
    a_values = [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
    return {
        **_BASE,
        "name": "fig5b_distance",
        "description": "GHZ fidelity and Renyi entropy vs dwell distance a for three Raman amplitudes",
        "observables": ["fidelity", "renyi2", "norm"],
        "sweeps": [
            {"axis": "dwell_distance_a", "values": a_values, "label": f"omega_p={om}MHz",
             "overrides": {"physics": {"omega_p_mhz": float(om)}}}
            for om in (70, 90, 120)
        ],
    }


def _fig6():
    sizes = [0, 1, 2, 3, 4, 5]
    return {
        **_BASE,
        "name": "fig6_mutualinfo",
        "description": "Renyi mutual information vs size of subset A (control + first targets)",
        "observables": ["fidelity", "renyi2", "mutual_information", "norm"],
        "sweeps": [
            {"axis": "subset_size", "values": sizes, "label": f"omega_p={om}MHz, a={a}um",
             "overrides": {"physics": {"omega_p_mhz": float(om)}, "geometry": {"a_um": float(a)}}}
            for om in (70, 90)
            for a in (3, 5, 7)
        ],
    }


_FACTORIES = {
    "fig2_cycles": _fig2,
    "fig3_upper": lambda: _fig3(False),
    "fig3_lower": lambda: _fig3(True),
    "fig4_route": _fig4,
    "fig5a_speed": _fig5a,
    "fig5b_distance": _fig5b,
    "fig6_mutualinfo": _fig6,
}

BUILTIN_NAMES = tuple(_FACTORIES)


def builtin_dict(name: str) -> dict:
    try:
        return _FACTORIES[name]()
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; available: {', '.join(BUILTIN_NAMES)}") from None


def builtin(name: str) -> ScenarioConfig:
    return config_from_dict(builtin_dict(name))
