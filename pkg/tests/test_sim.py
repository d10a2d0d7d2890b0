"""Integrator behavior: jit/reference agreement, determinism, conservation,
equilibrium holding, settling detection, error paths and exports."""

import dataclasses
import hashlib

import numpy as np
import pytest

import tvalloc as tv
from tvalloc.dynamics import initial_state, vector_field
from tvalloc.errors import Diverged, EmptyBox
from tvalloc.expr import parse_expr
from tvalloc.scenario import AgentSpec, Algorithm, Scenario, builtin_scenario
from tvalloc import sim

from test_dynamics import _balanced_scenario


def _euler_reference(scn, nsteps):
    st = initial_state(scn)
    for k in range(nsteps):
        st.t = k * scn.dt
        f = vector_field(st, scn)
        st.x += scn.dt * f.dx
        st.lam += scn.dt * f.dlam
        st.theta += scn.dt * f.dtheta
        st.theta_p += scn.dt * f.dtheta_p
    st.t = nsteps * scn.dt
    return st


class TestJitMatchesReference:
    @pytest.mark.parametrize("name", ["case1", "case2"])
    def test_fifty_steps_bitwise(self, name, warm_engine):
        scn = builtin_scenario(name)
        nsteps = 50
        ref = _euler_reference(scn, nsteps)
        result = sim.integrate(scn, t_end=nsteps * scn.dt, decimate=nsteps)
        got = result.final_state
        assert np.max(np.abs(got.x - ref.x)) < 1e-12
        assert np.max(np.abs(got.lam - ref.lam)) < 1e-12
        assert np.max(np.abs(got.theta - ref.theta)) < 1e-12
        assert np.max(np.abs(got.theta_p - ref.theta_p)) < 1e-12


class TestDeterminism:
    def test_identical_runs_are_byte_identical(self, warm_engine, tmp_path):
        scn = builtin_scenario("case2")
        digests = []
        for k in range(2):
            result = sim.integrate(scn, t_end=0.2, decimate=10)
            path = tmp_path / f"trace{k}.csv"
            result.trace.to_csv(path)
            sim.events_to_csv(result.events, tmp_path / f"ev{k}.csv")
            digests.append((
                hashlib.sha256(path.read_bytes()).hexdigest(),
                hashlib.sha256((tmp_path / f"ev{k}.csv").read_bytes()).hexdigest(),
            ))
        assert digests[0] == digests[1]


class TestEquilibriumHold:
    def test_balanced_time_invariant_scenario_stays_put(self, warm_engine):
        scn = _balanced_scenario(at_equilibrium=True)
        result = sim.integrate(scn, t_end=1.0, decimate=10)
        tr = result.trace
        assert np.abs(tr.e).max() < 1e-9
        assert np.abs(tr.imbalance).max() < 1e-9
        assert tr.consensus_err.max() < 1e-9
        assert np.abs(tr.x - scn.x0[None, :]).max() < 1e-9


class TestConservation:
    def test_theta_sum_drift_short(self, warm_engine):
        scn = builtin_scenario("case2")
        result = sim.integrate(scn, t_end=2.0)
        tr = result.trace
        drift = np.abs(tr.theta_sum - tr.theta_sum[0])
        assert drift.max() < 1e-6 * 2.0


class TestStepHalving:
    def test_smooth_early_interval(self, warm_engine):
        # before any signum term activates strongly, halving dt barely moves x
        scn = _balanced_scenario()  # starts away from optimum, smooth pull
        r1 = sim.integrate(scn, dt=1e-4, t_end=0.02, decimate=1000)
        r2 = sim.integrate(scn, dt=5e-5, t_end=0.02, decimate=2000)
        x1 = r1.final_state.x
        x2 = r2.final_state.x
        assert np.max(np.abs(x1 - x2)) < 5e-3 * max(1.0, np.max(np.abs(x1)))


class TestRuntimeErrors:
    def test_divergence_guard(self, warm_engine):
        scn = builtin_scenario("case1")
        hostile = dataclasses.replace(
            scn.gains, gamma_stat=(1e9, 1e9, 1e9), gamma_dual=(1e9, 1e9, 1e9))
        with pytest.raises(Diverged):
            sim.integrate(dataclasses.replace(scn, gains=hostile), t_end=0.1)

    def test_empty_box_beyond_validated_horizon(self, warm_engine):
        # bounds cross at t = 5, after the scenario's declared horizon of 2 s
        agents = [
            AgentSpec(A=1.0, cost=parse_expr("x^2"), activity=parse_expr("1"),
                      lower=parse_expr("t"), upper=parse_expr("10 - t")),
            AgentSpec(A=1.0, cost=parse_expr("x^2"), activity=parse_expr("1")),
        ]
        scn = Scenario(agents=agents, graph=tv.CommGraph(2, [(0, 1)]),
                       gains=builtin_scenario("case1").gains,
                       t_end=2.0, dt=1e-3, x0=np.zeros(2),
                       lambda0=np.zeros(2), theta0=np.zeros(2),
                       theta0p=np.zeros(2), algorithm=Algorithm.PROJ_FF,
                       name="crossing")
        with pytest.raises(EmptyBox):
            sim.integrate(scn, t_end=8.0)

    def test_bad_method_rejected(self):
        with pytest.raises(ValueError):
            sim.integrate(builtin_scenario("case1"), method="leapfrog")


class TestSmoothedSign:
    def test_smoothing_reduces_equilibrium_chatter(self, warm_engine):
        scn = _balanced_scenario()
        hard = sim.integrate(scn, t_end=1.0)
        soft = sim.integrate(scn, t_end=1.0, smooth_sign=1e-3)
        tail_hard = np.abs(hard.trace.e[hard.trace.t > 0.5]).max()
        tail_soft = np.abs(soft.trace.e[soft.trace.t > 0.5]).max()
        assert tail_soft <= tail_hard


class TestRK4:
    def test_rk4_runs_and_tracks_on_smooth_problem(self, warm_engine):
        scn = _balanced_scenario(at_equilibrium=True)
        result = sim.integrate(scn, method="rk4", t_end=0.5, decimate=100)
        assert np.abs(result.trace.e).max() < 1e-9

    def test_rk4_beats_euler_on_smoothed_field(self, warm_engine):
        # with heavy signum smoothing the field is differentiable, so the
        # higher-order stepper wins decisively at the same step size
        scn = _balanced_scenario()
        delta = 0.2
        ref = sim.integrate(scn, dt=2e-6, t_end=0.1, smooth_sign=delta,
                            decimate=50000)
        rk4 = sim.integrate(scn, dt=1e-3, t_end=0.1, method="rk4",
                            smooth_sign=delta, decimate=100)
        eul = sim.integrate(scn, dt=1e-3, t_end=0.1, smooth_sign=delta,
                            decimate=100)
        err_rk4 = np.abs(rk4.final_state.lam - ref.final_state.lam).max()
        err_eul = np.abs(eul.final_state.lam - ref.final_state.lam).max()
        assert err_rk4 < 1e-5
        assert err_rk4 * 50 < err_eul


class TestTraceRecords:
    def test_indexing_and_iteration(self, warm_engine):
        scn = builtin_scenario("case2")
        result = sim.integrate(scn, t_end=0.02, decimate=10, verify=True)
        tr = result.trace
        rec = tr[3]
        assert rec.t == tr.t[3]
        assert np.array_equal(rec.x, tr.x[3])
        assert rec.imbalance == tr.imbalance[3]
        assert rec.tracking_err == tr.tracking_err[3]
        assert rec.x_star is not None
        recs = list(tr)
        assert len(recs) == len(tr)
        assert all(a.t < b.t for a, b in zip(recs, recs[1:]))


class TestSettlingDetection:
    def test_identically_zero_metrics(self):
        ts = np.linspace(0, 5, 501)
        assert sim.settle_time(ts, np.zeros(501), 1e-3, 1.0) == 0.0

    def test_dip_then_reexceed_within_window(self):
        # candidate windows straddling the excursion are disqualified, so the
        # result lands just after the last excursion
        ts = np.linspace(0, 10, 1001)
        metric = np.full(1001, 1e-6)
        metric[:100] = 1.0          # initial transient to t=1
        metric[150:160] = 1.0       # re-excursion at t=1.5, inside [1.0, 2.0]
        got = sim.settle_time(ts, metric, 1e-3, 1.0)
        assert got == pytest.approx(1.6, abs=1e-9)

    def test_excursion_beyond_candidate_window_is_ignored(self):
        ts = np.linspace(0, 10, 1001)
        metric = np.full(1001, 1e-6)
        metric[:100] = 1.0
        metric[450:460] = 1.0       # excursion at t=4.5, past [1.0, 2.0]
        got = sim.settle_time(ts, metric, 1e-3, 1.0)
        assert got == pytest.approx(1.0, abs=1e-9)

    def test_window_must_fit(self):
        ts = np.linspace(0, 2, 201)
        metric = np.full(201, 1e-6)
        metric[:190] = 1.0
        assert sim.settle_time(ts, metric, 1e-3, 1.0) is None

    def test_clean_window_before_late_excursion_counts(self):
        # earliest certified window wins even if trouble returns later
        ts = np.linspace(0, 10, 1001)
        metric = np.full(1001, 1e-6)
        metric[:100] = 1.0
        metric[900:] = 1.0
        assert sim.settle_time(ts, metric, 1e-3, 1.0) == pytest.approx(1.0, abs=1e-9)

    def test_report_fields(self, warm_engine):
        scn = _balanced_scenario(at_equilibrium=True)
        result = sim.integrate(scn, t_end=2.0)
        rep = sim.detect_settling(result.trace)
        assert rep.t_rate_obs == 0.0
        assert rep.t_dual_obs == 0.0
        assert rep.t_sol_obs == 0.0
        assert rep.undershoot == pytest.approx(0.0, abs=1e-9)
        assert rep.as_dict()["t_sol_obs"] == 0.0

    def test_not_settled_encoding(self):
        rep = sim.SettlingReport(None, None, None, None)
        assert rep.as_dict()["t_dual_obs"] == "not settled"


class TestExports:
    def test_trace_csv_schema(self, warm_engine, tmp_path):
        scn = builtin_scenario("case2")
        result = sim.integrate(scn, t_end=0.05, decimate=100, verify=True)
        path = tmp_path / "trace.csv"
        result.trace.to_csv(path)
        header = path.read_text().splitlines()[0].split(",")
        n = scn.n
        expected = (["t"]
                    + [f"x_{i}" for i in range(n)]
                    + [f"lambda_{i}" for i in range(n)]
                    + [f"y_{i}" for i in range(n)]
                    + [f"e_{i}" for i in range(n)]
                    + [f"sigma_{i}" for i in range(n)]
                    + ["imbalance", "consensus_err"]
                    + [f"x_star_{i}" for i in range(n)]
                    + ["lambda_star", "tracking_err"])
        assert header == expected
        body = path.read_text().splitlines()[1:]
        assert len(body) == len(result.trace)
        # values round-trip through repr
        first = body[0].split(",")
        assert float(first[0]) == result.trace.t[0]

    def test_events_csv(self, warm_engine, tmp_path):
        scn = builtin_scenario("case2")
        result = sim.integrate(scn, t_end=1.2, decimate=100)
        path = tmp_path / "events.csv"
        sim.events_to_csv(result.events, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,agent,from,to"
        assert len(lines) - 1 == len(result.events)
        assert result.switch_count == len(result.events)
        for ev in result.events:
            assert ev.from_mode != ev.to_mode

    def test_decimation_keeps_first_and_last(self, warm_engine):
        scn = builtin_scenario("case1")
        result = sim.integrate(scn, t_end=0.0103, decimate=100)
        tr = result.trace
        assert tr.t[0] == 0.0
        assert tr.t[-1] == pytest.approx(0.0103, abs=1e-12)
