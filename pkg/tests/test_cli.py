"""Command-line interface: outputs, exit codes, flag handling."""

import json

import numpy as np
import pytest

from tvalloc.cli import main
from tvalloc.scenario import builtin_scenario, save_scenario

from test_dynamics import _balanced_scenario


@pytest.fixture()
def balanced_file(tmp_path):
    path = tmp_path / "balanced.json"
    save_scenario(_balanced_scenario(at_equilibrium=True), path)
    return str(path)


@pytest.fixture()
def bounded_balanced_file(tmp_path):
    """Same equilibrium instance, but run by the projection algorithm with
    wide (inactive) boxes, so the feasibility-absorption check applies."""
    import dataclasses
    from tvalloc.expr import parse_expr
    from tvalloc.scenario import Algorithm
    scn = _balanced_scenario(at_equilibrium=True)
    agents = [dataclasses.replace(a, lower=parse_expr("-100"),
                                  upper=parse_expr("100")) for a in scn.agents]
    scn = dataclasses.replace(scn, agents=agents, algorithm=Algorithm.PROJ_FF)
    path = tmp_path / "bounded.json"
    save_scenario(scn, path)
    return str(path)


class TestBounds:
    def test_case1_bounds_json(self, capsys):
        assert main(["bounds", "case1"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["t0"] == pytest.approx(4.281489, abs=1e-5)
        assert doc["t_sol_max"] == pytest.approx(3.455619, abs=1e-5)

    def test_missing_scenario_file(self, capsys):
        assert main(["bounds", "missing.json"]) == 2
        assert "error" in capsys.readouterr().err

    def test_disconnected_graph_file(self, tmp_path, capsys):
        from tvalloc.scenario import scenario_to_dict
        doc = scenario_to_dict(builtin_scenario("case1"))
        doc["edges"] = [[0, 1], [2, 3]]
        path = tmp_path / "disc.json"
        path.write_text(json.dumps(doc))
        assert main(["bounds", str(path)]) == 2


class TestSimulate:
    def test_writes_all_outputs(self, warm_engine, balanced_file, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["simulate", balanced_file, "--t-end", "1.5",
                     "--decimate", "50", "--out", str(out)])
        assert code == 0
        for name in ("trace.csv", "events.csv", "summary.json",
                     "x.svg", "lambda.svg", "e.svg", "imbalance.svg", "sigma.svg"):
            assert (out / name).exists(), name
        summary = json.loads((out / "summary.json").read_text())
        assert summary["schema"] == 1
        assert summary["switch_count"] == 0
        assert summary["settling"]["t_sol_obs"] != "not settled"
        assert set(summary["bounds"]) == {"t0", "t_rate_max", "t_dual_max", "t_sol_max"}

    def test_algorithm_override_conflicts_with_bounds(self, capsys):
        # case2 declares bounds; forcing the unconstrained algorithm is a
        # configuration error
        assert main(["simulate", "case2", "--algorithm", "ff"]) == 2

    def test_svg_rerender_is_identical(self, warm_engine, balanced_file, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["simulate", balanced_file, "--t-end", "0.3",
                         "--decimate", "30", "--out", str(out)]) == 0
        for name in ("x.svg", "imbalance.svg"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_respects_tvra_out_env(self, warm_engine, balanced_file, tmp_path, monkeypatch):
        monkeypatch.setenv("TVRA_OUT", str(tmp_path / "envout"))
        assert main(["simulate", balanced_file, "--t-end", "0.3",
                     "--decimate", "30"]) == 0
        assert (tmp_path / "envout" / "summary.json").exists()


class TestVerify:
    def test_balanced_scenario_passes_all_checks(self, warm_engine, balanced_file, capsys):
        code = main(["verify", balanced_file])
        lines = capsys.readouterr().out.strip().splitlines()
        assert code == 0
        assert all(line.startswith("PASS") for line in lines)
        assert len(lines) == 4  # (a)-(d); (e) is PROJ_FF-only

    def test_impossible_tracking_tolerance_fails(self, warm_engine, balanced_file, capsys):
        code = main(["verify", balanced_file, "--tol-track", "1e-300"])
        out = capsys.readouterr().out
        assert code == 1
        assert "FAIL (d)" in out

    def test_projection_scenario_gets_absorption_check(self, warm_engine,
                                                       bounded_balanced_file, capsys):
        code = main(["verify", bounded_balanced_file])
        lines = capsys.readouterr().out.strip().splitlines()
        assert code == 0
        assert len(lines) == 5  # (a)-(e)
        assert lines[-1].startswith("PASS (e)")


class TestSweep:
    def test_two_dt_values(self, warm_engine, balanced_file, tmp_path, capsys):
        out = tmp_path / "sweep"
        code = main(["sweep", balanced_file, "--param", "dt",
                     "--values", "1e-3,5e-4", "--out", str(out)])
        assert code == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "value,t_sol_obs,max_tracking_err,switch_count"
        assert len(lines) == 3

    def test_gain_sweep(self, warm_engine, balanced_file, tmp_path):
        out = tmp_path / "sweep2"
        code = main(["sweep", balanced_file, "--param", "gains.gamma_stat.2",
                     "--values", "1,10", "--out", str(out)])
        assert code == 0
        assert len((out / "sweep2.csv" if False else out / "sweep.csv").read_text().splitlines()) == 3

    def test_unknown_param(self, balanced_file, capsys):
        assert main(["sweep", balanced_file, "--param", "gains.bogus",
                     "--values", "1"]) == 2


class TestRuntimeExit:
    def test_diverged_returns_3(self, warm_engine, tmp_path):
        import dataclasses
        from tvalloc.scenario import scenario_to_dict, scenario_from_dict
        doc = scenario_to_dict(builtin_scenario("case1"))
        doc["gains"]["gamma_stat"] = [1e9, 1e9, 1e9]
        doc["gains"]["gamma_dual"] = [1e9, 1e9, 1e9]
        doc["t_end"] = 0.1
        path = tmp_path / "hostile.json"
        path.write_text(json.dumps(doc))
        assert main(["simulate", str(path), "--out", str(tmp_path / "o")]) == 3
