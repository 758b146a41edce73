import json

import numpy as np
import pytest

from sigflow import (
    FlowState,
    RoadGrid,
    ScenarioFileError,
    parse_scenario,
    run,
    serialize_scenario,
)
from sigflow.cli import main
from sigflow.output import emit_plot, read_snapshot, write_report, write_snapshot
from sigflow.presets import PresetError, parse_preset

GOOD_DOC = """
model: first
grid: {x_min: 0.0, x_max: 300.0, n_cells: 60}
signal: {x0: 200.0, t0: 6.0, tau0: 2.0, tau1: 3.0, h: 50.0}
force: {f0: 1.0, v_star: 16.0, delta: 4.0}
mu: 2.0
t_end: 10.0
numerics: {parabolic_dt: 0.001, snapshot_interval: 1.0}
profiles:
  rho0: sine(base=0.1, amp=0.02, wavelength=150)
  v0: 10.0
  rho_in: 0.1
  v_in: 10.0
"""


class TestPresets:
    def test_constant_from_number(self):
        fn = parse_preset(0.25)
        np.testing.assert_allclose(fn(np.arange(5.0)), 0.25)

    def test_call_string(self):
        fn = parse_preset("sine(base=0.1, amp=0.05, wavelength=200)")
        x = np.array([0.0, 50.0, 100.0])
        np.testing.assert_allclose(fn(x), 0.1 + 0.05 * np.sin(2 * np.pi * x / 200.0))

    def test_linear_ramp_clamps(self):
        fn = parse_preset("linear_ramp(start=2.0, end=6.0, x_start=10.0, x_end=20.0)")
        np.testing.assert_allclose(fn(np.array([0.0, 15.0, 30.0])), [2.0, 4.0, 6.0])

    def test_plateau(self):
        fn = parse_preset({"preset": "plateau", "inside": 0.2, "outside": 0.05,
                           "x_left": 10.0, "x_right": 20.0})
        np.testing.assert_allclose(fn(np.array([5.0, 15.0, 25.0])), [0.05, 0.2, 0.05])

    def test_table(self):
        fn = parse_preset({"table": {"x": [0.0, 10.0], "values": [1.0, 3.0]}})
        assert fn(5.0) == pytest.approx(2.0)

    def test_errors(self):
        with pytest.raises(PresetError):
            parse_preset("nope(a=1)")
        with pytest.raises(PresetError):
            parse_preset("sine(base=x)")
        with pytest.raises(PresetError):
            parse_preset([1, 2, 3])
        with pytest.raises(PresetError):
            parse_preset({"table": {"x": [0.0], "values": [1.0]}})


class TestParseScenario:
    def test_good_document(self):
        s = parse_scenario(GOOD_DOC)
        assert s.model == "first"
        assert s.grid.n_cells == 60
        assert s.timing.x0 == 200.0
        assert s.mu == 2.0
        assert s.cfl == 0.5  # default
        assert s.parabolic_dt == 0.001
        assert s.rho0(0.0) == pytest.approx(0.1)
        assert s.inflow.v_in(3.0) == pytest.approx(10.0)

    def test_snapshot_interval_defaults_to_horizon_fraction(self):
        doc = GOOD_DOC.replace("numerics: {parabolic_dt: 0.001, snapshot_interval: 1.0}",
                               "")
        s = parse_scenario(doc)
        assert s.snapshot_interval == pytest.approx(10.0 / 50.0)

    def test_force_off(self):
        s = parse_scenario(GOOD_DOC.replace(
            "force: {f0: 1.0, v_star: 16.0, delta: 4.0}", "force: off"))
        assert s.force is None

    def test_unknown_key_reported(self):
        with pytest.raises(ScenarioFileError) as exc:
            parse_scenario(GOOD_DOC + "\nturbo: true\n")
        assert any("turbo" in e for e in exc.value.errors)

    def test_bad_timing_reported_with_path(self):
        bad = GOOD_DOC.replace("tau0: 2.0", "tau0: -1.0")
        with pytest.raises(ScenarioFileError) as exc:
            parse_scenario(bad)
        assert any("signal" in e for e in exc.value.errors)

    def test_missing_keys_all_reported(self):
        with pytest.raises(ScenarioFileError) as exc:
            parse_scenario("model: first\n")
        errs = "\n".join(exc.value.errors)
        for key in ("grid", "signal", "mu", "t_end", "force", "profiles"):
            assert key in errs

    def test_not_yaml(self):
        with pytest.raises(ScenarioFileError):
            parse_scenario("{:::")
        with pytest.raises(ScenarioFileError):
            parse_scenario("- just\n- a\n- list\n")

    def test_invariant_violations_reported(self):
        bad = GOOD_DOC.replace("t_end: 10.0", "t_end: 7.0")  # red ends at 9
        with pytest.raises(ScenarioFileError) as exc:
            parse_scenario(bad)
        assert any("t_end" in e for e in exc.value.errors)

    def test_round_trip(self):
        s = parse_scenario(GOOD_DOC)
        s2 = parse_scenario(serialize_scenario(s))
        assert s2.grid == s.grid
        assert s2.timing == s.timing
        assert s2.mu == s.mu
        x = np.linspace(0.0, 300.0, 13)
        np.testing.assert_array_equal(s2.rho0(x), s.rho0(x))

    def test_serialize_requires_source(self):
        from tests.conftest import reference_scenario

        with pytest.raises(ValueError):
            serialize_scenario(reference_scenario())


class TestSnapshotFiles:
    def test_round_trip_bitwise(self, tmp_path):
        g = RoadGrid(0.0, 100.0, 8)
        rng = np.random.default_rng(12)
        state = FlowState(g, 0.1 + rng.uniform(0, 0.1, 8), rng.uniform(0, 10, 8),
                          1.2345678901234567)
        p = tmp_path / "snap.csv"
        write_snapshot(state, p)
        t, x, rho, v = read_snapshot(p)
        assert t == state.t
        np.testing.assert_array_equal(x, g.centers)
        np.testing.assert_array_equal(rho, state.rho)
        np.testing.assert_array_equal(v, state.v)

    def test_deterministic_bytes(self, tmp_path):
        g = RoadGrid(0.0, 100.0, 8)
        state = FlowState(g, np.full(8, 0.1), np.full(8, 7.0), 2.0)
        write_snapshot(state, tmp_path / "a.csv")
        write_snapshot(state, tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_header_format(self, tmp_path):
        g = RoadGrid(0.0, 100.0, 8)
        state = FlowState(g, np.full(8, 0.1), np.zeros(8), 0.5)
        p = tmp_path / "s.csv"
        write_snapshot(state, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "# t=0.5"
        assert lines[1] == "x,rho,v"
        assert len(lines) == 10


@pytest.fixture(scope="module")
def small_trajectory():
    s = parse_scenario(GOOD_DOC)
    return run(s)


class TestReportAndPlot:
    def test_report_document(self, small_trajectory, tmp_path):
        p = tmp_path / "report.json"
        write_report(small_trajectory, p, timings={"total": 0.5})
        doc = json.loads(p.read_text())
        assert doc["schema_version"] == 1
        assert doc["failed_phase"] is None
        assert len(doc["phases"]) == 4
        assert doc["mass_closure_residual"] == abs(doc["global"]["residual"])
        assert doc["phase_timings_s"] == {"total": 0.5}

    def test_failed_report_document(self, tmp_path):
        p = tmp_path / "report.json"
        write_report(None, p, failed_phase="upstream_braking", error="boom")
        doc = json.loads(p.read_text())
        assert doc["failed_phase"] == "upstream_braking"
        assert doc["error"] == "boom"

    def test_plot_outputs(self, small_trajectory, tmp_path):
        csv = tmp_path / "plot.csv"
        svg = tmp_path / "plot.svg"
        emit_plot(small_trajectory, "rho", csv, svg)

        lines = csv.read_text().splitlines()
        assert lines[0] == "t,x,value"
        n_rows = sum(s.grid.n_cells for s in small_trajectory.snapshots)
        assert len(lines) == 1 + n_rows

        text = svg.read_text()
        assert text.count('class="phase-marker"') == 3
        vals = [float(ln.split(",")[2]) for ln in lines[1:]]
        assert f"min={min(vals)!r}" in text
        assert f"max={max(vals)!r}" in text
        assert "time t (s)" in text and "position x (m)" in text

    def test_plot_rejects_unknown_field(self, small_trajectory, tmp_path):
        with pytest.raises(ValueError):
            emit_plot(small_trajectory, "speed", tmp_path / "a.csv", tmp_path / "a.svg")


class TestCli:
    @pytest.fixture()
    def config(self, tmp_path):
        p = tmp_path / "scenario.yaml"
        p.write_text(GOOD_DOC)
        return p

    def test_validate_ok(self, config, capsys):
        assert main(["validate", "--config", str(config)]) == 0
        assert "valid" in capsys.readouterr().out

    def test_validate_missing_file(self, tmp_path):
        assert main(["validate", "--config", str(tmp_path / "absent.yaml")]) == 2

    def test_validate_bad_config(self, tmp_path, capsys):
        p = tmp_path / "bad.yaml"
        p.write_text(GOOD_DOC.replace("mu: 2.0", "mu: -2.0"))
        assert main(["validate", "--config", str(p)]) == 2
        assert "mu" in capsys.readouterr().err

    def test_simulate_writes_outputs(self, config, tmp_path, capsys):
        out = tmp_path / "out"
        code = main(["simulate", "--config", str(config), "--out", str(out),
                     "--plot", "rho"])
        assert code == 0
        assert (out / "report.json").exists()
        assert (out / "plot_rho.csv").exists()
        assert (out / "plot_rho.svg").exists()
        snaps = sorted(out.glob("free_flow_*.csv"))
        assert snaps, "free-flow snapshots missing"
        doc = json.loads((out / "report.json").read_text())
        assert doc["mass_closure_residual"] < 1e-9

    def test_simulate_model_override(self, config, tmp_path):
        out = tmp_path / "out2"
        code = main(["simulate", "--config", str(config), "--out", str(out),
                     "--model", "second", "--nx", "40"])
        assert code == 0
        doc = json.loads((out / "report.json").read_text())
        assert all(p["solver"] == "parabolic" for p in doc["phases"])

    def test_verify_oracle(self, config, capsys):
        assert main(["verify-oracle", "--config", str(config)]) == 0
        out = capsys.readouterr().out
        assert "L1(rho)" in out and "refinement ratio" in out

    def test_verify_oracle_rejects_vacuum(self, tmp_path, capsys):
        p = tmp_path / "vac.yaml"
        p.write_text(GOOD_DOC.replace(
            "rho0: sine(base=0.1, amp=0.02, wavelength=150)", "rho0: 0.0"))
        assert main(["verify-oracle", "--config", str(p)]) == 2
        assert "rho0" in capsys.readouterr().err


class TestSampleScenarioFile:
    def test_shipped_example_parses(self):
        from pathlib import Path

        text = (Path(__file__).resolve().parent.parent
                / "scenarios" / "intersection.yaml").read_text()
        s = parse_scenario(text)
        assert s.model == "first"
