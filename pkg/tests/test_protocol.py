"""Law-level checks: signed powers, consensus operator, curvature/drift
weightings, estimator gating, feedback/feedforward terms, projection.

Switched-weighting expectations follow the stiff-penalty limit; the
pinned-mode drift signs are additionally validated against finite
differences of the centralized oracle in test_oracle.py.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tvalloc as tv
from tvalloc.errors import EmptyBox, MissingBound, NonConvexSample
from tvalloc.expr import parse_expr
from tvalloc.graph import CommGraph, ring
from tvalloc.protocol import (
    consensus_all,
    consensus_term,
    dual_drift,
    dual_drift_mode,
    dual_sens,
    dual_sens_mode,
    fb_ff,
    fb_proj,
    ff_dual,
    ff_primal,
    ff_primal_mode,
    project_box,
    rate_estimate,
    sig_pow,
)
from tvalloc.scenario import AgentSpec, builtin_scenario

finite_floats = st.floats(-1e6, 1e6, allow_nan=False)


class TestSigPow:
    def test_odd_cube_root(self):
        assert sig_pow(-8.0, 1.0 / 3.0) == pytest.approx(-2.0, rel=1e-12)

    def test_zero(self):
        assert sig_pow(0.0, 5.0 / 3.0) == 0.0

    def test_fractional_power(self):
        # 8^(5/3) = (8^(1/3))^5 = 2^5
        assert sig_pow(8.0, 5.0 / 3.0) == pytest.approx(32.0, rel=1e-12)

    @given(finite_floats)
    @settings(max_examples=80, deadline=None)
    def test_odd(self, v):
        assert sig_pow(-v, 0.6) == pytest.approx(-sig_pow(v, 0.6), rel=1e-12, abs=1e-300)

    @given(st.floats(-1e3, 1e3).map(lambda v: 0.0 if abs(v) < 1e-9 else v),
           st.floats(-1e3, 1e3).map(lambda v: 0.0 if abs(v) < 1e-9 else v))
    @settings(max_examples=80, deadline=None)
    def test_strictly_increasing(self, a, b):
        if a == b:
            return
        lo, hi = min(a, b), max(a, b)
        assert sig_pow(lo, 5.0 / 3.0) < sig_pow(hi, 5.0 / 3.0)

    @given(finite_floats)
    @settings(max_examples=50, deadline=None)
    def test_identity_at_alpha_one(self, v):
        assert sig_pow(v, 1.0) == pytest.approx(v, rel=1e-12, abs=0.0)


class TestConsensus:
    def test_zero_at_agreement(self):
        g = ring(6)
        vals = [5.0] * 6
        for i in range(6):
            assert consensus_term(i, vals, g, (1, 1, 1), 2 / 3) == 0.0

    def test_k2_hand_value(self):
        g = CommGraph(2, [(0, 1)])
        # difference 1: 1^(1/3) + 1^(5/3) + 1 = 3
        assert consensus_term(0, [1.0, 0.0], g, (1, 1, 1), 2 / 3) == pytest.approx(3.0)
        assert consensus_term(1, [1.0, 0.0], g, (1, 1, 1), 2 / 3) == pytest.approx(-3.0)

    def test_pairwise_antisymmetry_sums_to_zero(self):
        rng = np.random.default_rng(1)
        g = ring(5)
        for _ in range(30):
            vals = rng.normal(size=5) * 10
            out = consensus_all(vals, g, (3.0, 2.0, 7.0), 2 / 3)
            # pairwise cancellation up to accumulation rounding
            assert abs(sum(out)) < 1e-12 * max(1.0, max(abs(v) for v in out))

    def test_consensus_all_matches_per_agent_terms(self):
        rng = np.random.default_rng(2)
        g = ring(4)
        vals = rng.normal(size=4)
        out = consensus_all(vals, g, (1.0, 2.0, 3.0), 2 / 3)
        for i in range(4):
            assert out[i] == pytest.approx(
                consensus_term(i, vals, g, (1.0, 2.0, 3.0), 2 / 3), rel=1e-12)


def _case1_agent(i: int) -> AgentSpec:
    return builtin_scenario("case1").agents[i - 1]


class TestWeightings:
    def test_inverse_curvature_case1(self):
        a = _case1_agent(1)
        assert dual_sens(a, 3.7, 0.0) == pytest.approx(1 / 2.2, rel=1e-12)

    def test_drift_case1_origin(self):
        a = _case1_agent(1)
        # f_xt = 0 at x=0; b_t(0) = 0.5 + 0.1
        assert dual_drift(a, 0.0, 0.0) == pytest.approx(0.6, rel=1e-12)

    def test_zero_coefficient(self):
        a = AgentSpec(A=0.0, cost=parse_expr("x^2"), activity=parse_expr("3*t"))
        assert dual_sens(a, 1.0, 1.0) == 0.0
        assert dual_drift(a, 1.0, 1.0) == pytest.approx(3.0)

    def test_nonconvex_sample_raises(self):
        a = AgentSpec(A=1.0, cost=parse_expr("x^3"), activity=parse_expr("0"))
        with pytest.raises(NonConvexSample):
            dual_sens(a, -1.0, 0.0, agent_id=4)

    def test_mode_zero_is_bit_identical(self):
        a = _case1_agent(2)
        for x, t in [(0.3, 1.0), (-2.0, 7.5)]:
            assert dual_sens_mode(a, x, t, 0) == dual_sens(a, x, t)
            assert dual_drift_mode(a, x, t, 0) == dual_drift(a, x, t)

    def test_pinned_upper(self):
        a = AgentSpec(A=2.0, cost=parse_expr("x^2"), activity=parse_expr("5*t"),
                      upper=parse_expr("10 + 0.1*t^2"))
        t = 5.0
        assert dual_sens_mode(a, 1.0, t, 1) == 0.0
        # drift collapses to b_t - A * d/dt upper
        assert dual_drift_mode(a, 1.0, t, 1) == pytest.approx(5.0 - 2.0 * 1.0, rel=1e-12)

    def test_pinned_lower(self):
        a = AgentSpec(A=2.0, cost=parse_expr("x^2"), activity=parse_expr("5*t"),
                      lower=parse_expr("t"))
        assert dual_sens_mode(a, 1.0, 3.0, -1) == 0.0
        # stiff-penalty limit: b_t - A * d/dt lower (sign checked vs oracle too)
        assert dual_drift_mode(a, 1.0, 3.0, -1) == pytest.approx(5.0 - 2.0, rel=1e-12)

    def test_missing_bound(self):
        a = AgentSpec(A=1.0, cost=parse_expr("x^2"), activity=parse_expr("0"),
                      upper=parse_expr("10"))
        with pytest.raises(MissingBound):
            dual_sens_mode(a, 0.0, 0.0, -1)
        with pytest.raises(MissingBound):
            ff_primal_mode(a, 0.0, 0.0, 0.0, -1)


class TestRateEstimate:
    def test_plain_ratio(self):
        assert rate_estimate(0.5, 1.0, 0.1) == pytest.approx(2.0)

    def test_guard_active(self):
        assert rate_estimate(0.05, 7.0, 0.1) == 0.0

    def test_boundary_inclusive(self):
        assert rate_estimate(0.1, 0.7, 0.1) == pytest.approx(7.0)


class TestFeedforward:
    def test_zero_rate_zero_drift(self):
        a = _case1_agent(1)
        assert ff_primal(a, 0.0, 0.0, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_case1_unit_rate(self):
        a = _case1_agent(1)
        assert ff_primal(a, 0.0, 0.0, 1.0) == pytest.approx(-1 / 2.2, rel=1e-12)

    def test_dual_feedforward_is_identity(self):
        assert ff_dual(3.7) == 3.7

    def test_switched_reduces_at_mode_zero(self):
        a = _case1_agent(3)
        assert ff_primal_mode(a, 1.0, 2.0, 0.5, 0) == ff_primal(a, 1.0, 2.0, 0.5)

    def test_switched_tracks_upper_bound_rate(self):
        a = AgentSpec(A=1.0, cost=parse_expr("x^2"), activity=parse_expr("0"),
                      upper=parse_expr("10 + 0.1*t^2"))
        assert ff_primal_mode(a, 9.0, 5.0, -3.3, 1) == pytest.approx(1.0, rel=1e-12)

    def test_switched_tracks_lower_bound_rate(self):
        a = AgentSpec(A=1.0, cost=parse_expr("x^2"), activity=parse_expr("0"),
                      lower=parse_expr("t"))
        assert ff_primal_mode(a, 9.0, 5.0, -3.3, -1) == pytest.approx(1.0, rel=1e-12)


class TestFeedbackFF:
    def test_zero_error_zero_feedback(self):
        scn = builtin_scenario("case1")
        a = scn.agents[0]
        fb_x, fb_dual, err = fb_ff(a, 0.0, 0.0, 0.0, scn.gains)
        assert err == 0.0
        assert fb_x == 0.0
        # kappa_dual * b_1(0) = 5 * 10
        assert fb_dual == pytest.approx(50.0, rel=1e-12)

    def test_unit_error_value(self):
        scn = builtin_scenario("case1")
        g = scn.gains  # gamma_stat = (1, 1, 10), kappa_x = 1
        a = scn.agents[0]
        # choose lam so that e = f_x(0.0) + lam = 1
        fb_x, _, err = fb_ff(a, 0.0, 0.0, 1.0, g)
        assert err == pytest.approx(1.0)
        assert fb_x == pytest.approx((1 + 1 + 10) / 2.2, rel=1e-12)


class TestProjection:
    def test_basic_clamps(self):
        assert project_box(-5.0, 0.0, 10.0) == 0.0
        assert project_box(5.0, 0.0, 10.0) == 5.0
        assert project_box(12.0, 0.0, 10.0) == 10.0

    def test_empty_box(self):
        with pytest.raises(EmptyBox):
            project_box(1.0, 2.0, 1.0)

    @given(st.floats(-100, 100), st.floats(-100, 100))
    @settings(max_examples=80, deadline=None)
    def test_nonexpansive(self, a, b):
        pa = project_box(a, -3.0, 7.0)
        pb = project_box(b, -3.0, 7.0)
        assert abs(pa - pb) <= abs(a - b) + 1e-15

    @given(st.floats(-100, 100))
    @settings(max_examples=50, deadline=None)
    def test_idempotent(self, v):
        p = project_box(v, -3.0, 7.0)
        assert project_box(p, -3.0, 7.0) == p


class TestFeedbackProj:
    def _agent(self, lower="0", upper="10"):
        return AgentSpec(A=1.0, cost=parse_expr("x^2"), activity=parse_expr("4"),
                         lower=parse_expr(lower) if lower else None,
                         upper=parse_expr(upper) if upper else None)

    def test_unbounded_matches_ff_error_up_to_kappa(self):
        scn = builtin_scenario("case1")
        a = scn.agents[0]
        x, t, lam = 1.3, 2.0, -4.0
        kkt_step, _, _, proj_err, mode = fb_proj(a, x, t, lam, scn.gains)
        _, _, err_ff = fb_ff(a, x, t, lam, scn.gains)
        assert mode == 0
        assert proj_err == pytest.approx(scn.gains.kappa_x * err_ff, rel=1e-12)
        assert kkt_step == pytest.approx(proj_err, rel=1e-12)

    def test_lower_activation(self):
        # x=0, kkt step 5: tentative -5 projects to 0 -> mode -1, err 0
        scn = builtin_scenario("case1")
        a = self._agent()
        lam = 5.0  # f_x(0) = 0, so step = kappa_x * lam = 5
        kkt, _, _, err, mode = fb_proj(a, 0.0, 0.0, lam, scn.gains)
        assert kkt == pytest.approx(5.0)
        assert mode == -1
        assert err == pytest.approx(0.0, abs=1e-15)

    def test_upper_activation(self):
        # x=8, step -5: tentative 13 >= 10 -> mode +1, err = 8 - 10 = -2
        scn = builtin_scenario("case1")
        a = self._agent()
        lam = -21.0  # f_x(8) = 16, step = 16 - 21 = -5
        kkt, _, _, err, mode = fb_proj(a, 8.0, 0.0, lam, scn.gains)
        assert kkt == pytest.approx(-5.0)
        assert mode == 1
        assert err == pytest.approx(-2.0)

    def test_one_sided_bound_never_triggers_missing_side(self):
        scn = builtin_scenario("case1")
        a = self._agent(lower=None)
        _, _, _, _, mode = fb_proj(a, 0.0, 0.0, 100.0, scn.gains)
        assert mode == 0  # tentative very negative, but no lower bound exists
