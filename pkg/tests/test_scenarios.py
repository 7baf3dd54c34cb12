import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitcnot.hamiltonian import PhysicalParams
from eitcnot.propagate import NumericalError
from eitcnot.scenarios import (
    BUILTIN_NAMES,
    ConfigError,
    ScenarioConfig,
    SweepSpec,
    builtin,
    emit_outputs,
    loads,
    run_scenario,
    run_sweep,
)
from eitcnot.scenarios import cli, runner
from eitcnot.scenarios.builtin import builtin_dict
from eitcnot.scenarios.config import config_from_dict
from eitcnot.scenarios.output import OutputError
from eitcnot.scenarios.runner import ScenarioResult, point_config

SMALL = {
    "schema_version": 1,
    "name": "small",
    "schedule": {"num_targets": 1},
    "initial": {"control": "equal_superposition", "targets": "A"},
    "observables": ["populations", "fidelity", "parity", "renyi2", "norm"],
    "track": [["g0", "A"], ["g1", "B"]],
    "sample_points": 40,
    "tol": 1e-8,
}


def small(**overrides):
    return config_from_dict({**SMALL, **overrides})


class TestConfig:
    def test_builtin_names(self):
        assert BUILTIN_NAMES == (
            "fig2_cycles", "fig3_upper", "fig3_lower", "fig4_route",
            "fig5a_speed", "fig5b_distance", "fig6_mutualinfo",
        )

    def test_defaults_match_reference_constants(self):
        cfg = ScenarioConfig()
        assert cfg.schedule.t_gap_us == 1.09
        assert cfg.schedule.t_r_us == 0.0166
        assert cfg.geometry.a_um == 5.0 and cfg.geometry.d_um == 60.0
        p, ref = cfg.physical_params(), PhysicalParams()
        for field in ("omega_p_peak", "omega_c", "delta", "gamma_r", "gamma_p", "c3", "c6"):
            assert getattr(p, field) == pytest.approx(getattr(ref, field), rel=1e-14)
        assert p.omega_c == pytest.approx(2 * math.pi * 175)

    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_builtin_round_trip(self, name):
        cfg = builtin(name)
        again = loads(cfg.to_json())
        assert again == cfg
        assert again.to_json() == cfg.to_json()

    @settings(max_examples=30, deadline=None)
    @given(
        om=st.floats(10, 300), a=st.floats(2.5, 25), gap=st.floats(0.1, 5),
        decay=st.booleans(), orient=st.sampled_from(["A", "B"]),
        values=st.lists(st.floats(1, 100), min_size=1, max_size=5, unique=True),
    )
    def test_round_trip_property(self, om, a, gap, decay, orient, values):
        raw = {
            "schema_version": 1,
            "physics": {"omega_p_mhz": om, "decay": decay},
            "geometry": {"kind": "square", "d_um": 60.0, "a_um": a},
            "schedule": {"num_targets": 2, "t_gap_us": gap},
            "initial": {"control": "g1", "targets": "AB"},
            "fidelity": {"orientation": orient},
            "sweeps": [{"axis": "avg_speed", "values": sorted(values)}],
        }
        cfg = config_from_dict(raw)
        assert loads(cfg.to_json()) == cfg

    def test_unknown_key_with_line(self):
        text = '{\n  "schema_version": 1,\n  "physics": {\n    "omega_q_mhz": 5\n  }\n}'
        with pytest.raises(ConfigError) as err:
            loads(text)
        assert err.value.line == 4
        assert "omega_q_mhz" in str(err.value)

    def test_schema_version_required(self):
        with pytest.raises(ConfigError):
            config_from_dict({"name": "x"})
        with pytest.raises(ConfigError):
            config_from_dict({"schema_version": 2})

    def test_json_syntax_line(self):
        with pytest.raises(ConfigError) as err:
            loads('{\n "schema_version": 1,\n "name": \n}')
        assert err.value.line == 4

    @pytest.mark.parametrize("patch", [
        {"sweeps": [{"axis": "avg_speed", "values": [10, 30, 20]}]},
        {"sweeps": [{"axis": "speed", "values": [10]}]},
        {"sweeps": [{"axis": "n_cycles", "values": [1, 2.5]}]},
        {"observables": ["entropy"]},
        {"schedule": {"num_targets": 2, "n_cycles": 3}, "initial": {"control": "g0", "targets": "AA"}},
        {"tol": 1e-3},
        {"initial": {"control": "g0", "targets": "AA"}},
        {"geometry": {"a_um": 40.0}},
        {"physics": {"omega_p_mhz": -1}},
        {"physics": {"decay": "yes"}},
        {"fidelity": {"convention": "trace"}},
        {"output": {"formats": ["pdf"]}},
        {"truth_table": [["g0"]]},
    ])
    def test_invalid_configs(self, patch):
        with pytest.raises(ConfigError):
            small(**patch)

    def test_explicit_geometry(self):
        cfg = small(geometry={
            "kind": "explicit", "d_um": 10.0, "a_um": 2.0,
            "targets": [[0, 0]], "dwell_points": [[2, 0]],
        })
        g = cfg.build_geometry()
        assert np.allclose(g.dwell_points, [[2, 0]])


class TestPointConfig:
    def test_speed_sets_gap(self):
        cfg = builtin("fig5a_speed")
        pc = point_config(cfg, SweepSpec("avg_speed", (50.0,)), 50.0)
        assert pc.schedule.t_gap_us == pytest.approx((60 * math.sqrt(2) - 10) / 50)

    def test_other_axes(self):
        cfg = builtin("fig5b_distance")
        sweep = cfg.sweeps[2]
        pc = point_config(cfg, sweep, 7.0)
        assert pc.geometry.a_um == 7.0 and pc.physics.omega_p_mhz == 120.0
        assert point_config(cfg, SweepSpec("omega_p", (90.0,)), 90.0).physics.omega_p_mhz == 90.0
        one = small()
        assert point_config(one, SweepSpec("n_cycles", (3,)), 3).schedule.n_cycles == 3
        with pytest.raises(ValueError):
            point_config(one, SweepSpec("n_cycles", (1.5,)), 1.5)


class TestRunner:
    def test_run_scenario_summary(self):
        res = run_scenario(small())
        s = res.summary
        for key in ("fidelity", "parity", "S2_AB", "norm_deficit", "wall_clock_s", "final_norm"):
            assert key in s
        assert s["parity"] > 0.9 and s["fidelity"] > 0.95
        assert len(res.series.times) == 40
        assert set(res.series.columns) >= {"P[g0,A]", "P[g1,B]", "fidelity", "norm", "S2[0]", "parity"}

    def test_sweep_independent_of_workers_and_order(self):
        cfg = small()
        sweep = SweepSpec("omega_p", (70.0, 90.0))
        a = run_sweep(cfg, sweep, workers=1)
        b = run_sweep(cfg, sweep, workers=2)
        assert a.rows == b.rows
        rev = run_sweep(cfg, SweepSpec("omega_p", (90.0, 70.0)), workers=1)
        assert rev.rows[::-1] == a.rows
        assert [r["omega_p"] for r in a.rows] == [70.0, 90.0]

    def test_point_failure_recorded(self):
        cfg = small()
        res = run_sweep(cfg, SweepSpec("dwell_distance_a", (5.0, 45.0)), workers=1)
        assert res.rows[0]["error"] == ""
        assert "a_um" in res.rows[1]["error"]
        assert math.isnan(res.column("fidelity")[1])

    def test_even_cycles_have_no_bell_target(self):
        res = run_sweep(small(), SweepSpec("n_cycles", (1, 2)), workers=1)
        fid = res.column("fidelity")
        assert fid[0] > 0.95 and math.isnan(fid[1])
        assert res.rows[1]["parity"] < 0.2

    def test_subset_sweep_endpoints(self):
        cfg = small(observables=["fidelity", "mutual_information"])
        res = run_sweep(cfg, SweepSpec("subset_size", (0, 1, 2)), workers=1)
        mi = res.column("mutual_information")
        assert mi[0] == pytest.approx(0.0, abs=1e-9) and mi[2] == pytest.approx(0.0, abs=1e-9)
        assert mi[1] > 1.5

    def test_default_workers_env(self, monkeypatch):
        monkeypatch.setenv(runner.WORKERS_ENV, "3")
        assert runner.default_workers() == 3
        monkeypatch.setenv(runner.WORKERS_ENV, "lots")
        assert runner.default_workers() == 1


@pytest.fixture(scope="module")
def result():
    cfg = small(truth_table=[["g0", "A"], ["g1", "A"]], sweeps=[{"axis": "omega_p", "values": [70, 90]}])
    return run_scenario(cfg, workers=1)


class TestOutputs:
    def test_files_written(self, result, tmp_path):
        paths = emit_outputs(result, tmp_path)
        names = sorted(p.name for p in paths)
        assert names == sorted([
            "small_series.csv", "small_truth1.csv", "small_sweep1.csv", "small.json",
            "small_series.svg", "small_truth1.svg", "small_sweep1.svg",
        ])
        with open(tmp_path / "small_series.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0][0] == "t_us" and len(rows) == 41
        assert float(rows[-1][0]) == result.series.times[-1]
        with open(tmp_path / "small_sweep1.csv", encoding="utf-8") as fh:
            header = next(csv.reader(fh))
        assert header[:2] == ["omega_p", "fidelity"] and header[-1] == "error"
        doc = json.loads((tmp_path / "small.json").read_text())
        assert doc["summary"]["parity"] == result.summary["parity"]
        assert doc["truth_tables"][0]["initial"] == ["|0,A>", "|1,A>"]
        assert (tmp_path / "small_truth1.svg").read_text().startswith("<?xml")

    def test_full_precision(self, result, tmp_path):
        emit_outputs(result, tmp_path, ["csv"])
        with open(tmp_path / "small_series.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        col = rows[0].index("fidelity")
        values = [float(r[col]) for r in rows[1:]]
        assert values == list(result.series.columns["fidelity"])

    def test_bit_identical_rerun(self, tmp_path):
        cfg = small()
        emit_outputs(run_scenario(cfg), tmp_path / "a", ["csv", "svg"])
        emit_outputs(run_scenario(cfg), tmp_path / "b", ["csv", "svg"])
        for name in ("small_series.csv", "small_series.svg"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_empty_result(self, tmp_path):
        with pytest.raises(ValueError):
            emit_outputs(ScenarioResult(small()), tmp_path)

    def test_unwritable(self, result, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OutputError) as err:
            emit_outputs(result, blocker / "sub", ["csv"])
        assert "file" in str(err.value)


class TestCli:
    def test_list(self, capsys):
        assert cli.main(["list-scenarios"]) == 0
        out = capsys.readouterr().out
        assert all(name in out for name in BUILTIN_NAMES)

    def test_validate(self, tmp_path, capsys):
        good = tmp_path / "good.json"
        good.write_text(json.dumps(SMALL))
        assert cli.main(["validate", str(good)]) == 0
        bad = tmp_path / "bad.json"
        bad.write_text('{"schema_version": 1,\n "nmae": "x"}')
        assert cli.main(["validate", str(bad)]) == 2
        assert "line 2" in capsys.readouterr().err
        assert cli.main(["validate", str(tmp_path / "missing.json")]) == 2

    def test_run_and_sweep(self, tmp_path):
        cfg = tmp_path / "small.json"
        cfg.write_text(json.dumps(SMALL))
        assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o"), "--format", "csv", "--tol", "1e-8"]) == 0
        assert (tmp_path / "o" / "small_series.csv").exists()
        assert cli.main(["sweep", str(cfg), "--axis", "omega_p", "--values", "70,90",
                         "--out", str(tmp_path / "s"), "--format", "csv", "--workers", "1"]) == 0
        with open(tmp_path / "s" / "small_sweep1.csv", encoding="utf-8") as fh:
            assert len(list(csv.reader(fh))) == 3
        assert cli.main(["sweep", str(cfg), "--axis", "omega_p", "--values", "70,90,80"]) == 2
        assert cli.main(["run", str(cfg), "--tol", "1e-3"]) == 2

    def test_numerical_failure_exit_code(self, tmp_path, monkeypatch):
        cfg = tmp_path / "small.json"
        cfg.write_text(json.dumps(SMALL))

        def boom(*args, **kwargs):
            raise NumericalError("non-finite amplitudes")

        monkeypatch.setattr(cli, "run_scenario", boom)
        assert cli.main(["run", str(cfg), "--out", str(tmp_path)]) == 3

    def test_builtin_dict_unknown(self):
        with pytest.raises(KeyError):
            builtin_dict("fig9")
