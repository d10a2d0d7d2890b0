"""Complete multi-agent vector fields for both algorithms, the analytic
settling-time bound calculator, and the a-posteriori gain-condition monitor.

These vector fields are the readable reference semantics; the fixed-step
integrator in tvalloc.sim runs a jit-compiled core that is cross-checked
against them in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonConvexSample
from .expr import evaluate
from .graph import algebraic_connectivity
from .protocol import (
    consensus_all,
    fb_ff,
    fb_proj,
    dual_drift,
    dual_drift_mode,
    dual_sens,
    dual_sens_mode,
    ff_dual,
    ff_primal,
    ff_primal_mode,
    rate_estimate,
)
from .scenario import Algorithm, Scenario


@dataclass
class SimState:
    """Flattened per-agent state. theta/theta_p are the integral states of
    the two average-consensus estimators (their sums are conserved)."""

    x: np.ndarray
    lam: np.ndarray
    theta: np.ndarray
    theta_p: np.ndarray
    t: float

    def copy(self) -> "SimState":
        return SimState(self.x.copy(), self.lam.copy(), self.theta.copy(),
                        self.theta_p.copy(), self.t)


@dataclass
class FieldEval:
    """One evaluation of a vector field plus the observables it produced."""

    dx: np.ndarray
    dlam: np.ndarray
    dtheta: np.ndarray
    dtheta_p: np.ndarray
    rate: np.ndarray          # local dual-rate estimates y_i
    stat_err: np.ndarray      # stationarity / projection error e_i
    mode: np.ndarray          # switching signal per agent (0 for FF)
    sens_est: np.ndarray      # consensus estimate psi_i
    drift_est: np.ndarray     # consensus estimate psi'_i
    imbalance: float


def initial_state(scn: Scenario) -> SimState:
    return SimState(scn.x0.copy(), scn.lambda0.copy(),
                    scn.theta0.copy(), scn.theta0p.copy(), 0.0)


def vector_field_ff(state: SimState, scn: Scenario) -> FieldEval:
    """Feedback-feedforward field (no local feasibility constraints)."""
    n = scn.n
    g = scn.gains
    t = state.t
    sens = np.empty(n)
    drift = np.empty(n)
    for i, a in enumerate(scn.agents):
        sens[i] = dual_sens(a, state.x[i], t, i)
        drift[i] = dual_drift(a, state.x[i], t, i)
    sens_est = state.theta + sens
    drift_est = state.theta_p - drift

    rate = np.array([rate_estimate(sens_est[i], drift_est[i], g.epsilon)
                     for i in range(n)])

    c_sens = consensus_all(sens_est, scn.graph, g.gamma_sens, g.p_over_q)
    c_drift = consensus_all(drift_est, scn.graph, g.gamma_drift, g.p_over_q)
    c_dual = consensus_all(state.lam, scn.graph, g.gamma_dual, g.p_over_q)

    dx = np.empty(n)
    dlam = np.empty(n)
    err = np.empty(n)
    for i, a in enumerate(scn.agents):
        fb_x, fb_dual, err[i] = fb_ff(a, state.x[i], t, state.lam[i], g, i)
        dx[i] = -fb_x + ff_primal(a, state.x[i], t, rate[i], i)
        dlam[i] = -c_dual[i] - fb_dual + ff_dual(rate[i])

    imbalance = float(sum(a.A * state.x[i] - evaluate(a.activity, 0.0, t)
                          for i, a in enumerate(scn.agents)))
    return FieldEval(
        dx=dx, dlam=dlam,
        dtheta=-np.asarray(c_sens), dtheta_p=-np.asarray(c_drift),
        rate=rate, stat_err=err, mode=np.zeros(n, dtype=np.int8),
        sens_est=sens_est, drift_est=drift_est, imbalance=imbalance,
    )


def vector_field_proj(state: SimState, scn: Scenario) -> FieldEval:
    """Projection-based field with switched feedforward; the switching signal
    is recomputed from (x, lam, t) on every evaluation."""
    n = scn.n
    g = scn.gains
    t = state.t
    mode = np.zeros(n, dtype=np.int8)
    err = np.empty(n)
    fb_x = np.empty(n)
    fb_dual = np.empty(n)
    for i, a in enumerate(scn.agents):
        _, fb_x[i], fb_dual[i], err[i], mode[i] = fb_proj(
            a, state.x[i], t, state.lam[i], g, i)

    sens = np.empty(n)
    drift = np.empty(n)
    for i, a in enumerate(scn.agents):
        sens[i] = dual_sens_mode(a, state.x[i], t, int(mode[i]), i)
        drift[i] = dual_drift_mode(a, state.x[i], t, int(mode[i]), i)
    sens_est = state.theta + sens
    drift_est = state.theta_p - drift
    rate = np.array([rate_estimate(sens_est[i], drift_est[i], g.epsilon)
                     for i in range(n)])

    c_sens = consensus_all(sens_est, scn.graph, g.gamma_sens, g.p_over_q)
    c_drift = consensus_all(drift_est, scn.graph, g.gamma_drift, g.p_over_q)
    c_dual = consensus_all(state.lam, scn.graph, g.gamma_dual, g.p_over_q)

    dx = np.empty(n)
    dlam = np.empty(n)
    for i, a in enumerate(scn.agents):
        dx[i] = -fb_x[i] + ff_primal_mode(a, state.x[i], t, rate[i], int(mode[i]), i)
        dlam[i] = -c_dual[i] - fb_dual[i] + ff_dual(rate[i])

    imbalance = float(sum(a.A * state.x[i] - evaluate(a.activity, 0.0, t)
                          for i, a in enumerate(scn.agents)))
    return FieldEval(
        dx=dx, dlam=dlam,
        dtheta=-np.asarray(c_sens), dtheta_p=-np.asarray(c_drift),
        rate=rate, stat_err=err, mode=mode,
        sens_est=sens_est, drift_est=drift_est, imbalance=imbalance,
    )


def vector_field(state: SimState, scn: Scenario) -> FieldEval:
    if scn.algorithm == Algorithm.FF:
        return vector_field_ff(state, scn)
    return vector_field_proj(state, scn)


# ---------------------------------------------------------------------------
# Settling-time bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundsReport:
    """Analytic settling-time bounds implied by the gains and the graph."""

    t0: float
    t_rate_max: float      # estimator consensus (y_i)
    t_dual_max: float      # dual-variable consensus
    t_sol_max: float       # full solving time

    def as_dict(self) -> dict:
        return {
            "t0": self.t0,
            "t_rate_max": self.t_rate_max,
            "t_dual_max": self.t_dual_max,
            "t_sol_max": self.t_sol_max,
        }


def settling_bounds(scn: Scenario) -> BoundsReport:
    g = scn.gains
    n = scn.n
    eta2 = algebraic_connectivity(scn.graph)
    t0 = math.pi * g.q * n ** (g.p / (2.0 * g.q)) / (2.0 * g.p * eta2)
    t_rate = max(
        (g.gamma_sens[0] * g.gamma_sens[1]) ** -0.5,
        (g.gamma_drift[0] * g.gamma_drift[1]) ** -0.5,
    ) * t0
    t_dual = (g.gamma_dual[0] * g.gamma_dual[1]) ** -0.5 * t0
    t_sol = max(t_rate, t_dual) + eta2 * (
        2.0 * g.kappa_x ** 2 * g.gamma_stat[0] * g.gamma_stat[1]
    ) ** -0.5 * t0
    for v in (t0, t_rate, t_dual, t_sol):
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("settling bounds must be positive and finite")
    return BoundsReport(t0, t_rate, t_dual, t_sol)


# ---------------------------------------------------------------------------
# Gain-condition monitor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainReport:
    """Trajectory-based estimates of the boundedness constants the settling
    guarantees assume, with the corresponding gain checks. Reporting only;
    nothing is enforced."""

    c1: float
    c2: float
    c3: float
    c4: float
    required: dict
    satisfied: dict

    def as_dict(self) -> dict:
        return {
            "c1": self.c1, "c2": self.c2, "c3": self.c3, "c4": self.c4,
            "required": self.required, "satisfied": self.satisfied,
        }


def gain_monitor(trace, scn: Scenario) -> GainReport:
    """Estimate the boundedness constants along a simulated trace.

    c1/c2 are finite-difference slopes of the (switched) curvature and drift
    weightings; samples straddling a mode change are excluded since those
    signals jump there by design.
    """
    g = scn.gains
    n = scn.n
    t = trace.t
    if len(t) < 2:
        raise ValueError("need at least two trace records")

    sens = np.empty((len(t), n))
    drift = np.empty((len(t), n))
    fxt = np.empty((len(t), n))
    b = np.empty((len(t), n))
    lo_t = np.zeros((len(t), n))
    hi_t = np.zeros((len(t), n))
    for i, a in enumerate(scn.agents):
        xi = trace.x[:, i]
        fxx = evaluate(a.cost_xx, xi, t)
        fxt[:, i] = evaluate(a.cost_xt, xi, t)
        b[:, i] = evaluate(a.activity, np.zeros_like(t), t)
        bt = evaluate(a.activity_t, np.zeros_like(t), t)
        if np.any(fxx <= 0):
            raise NonConvexSample(i, float(t[int(np.argmax(fxx <= 0))]))
        if a.lower is not None:
            lo_t[:, i] = evaluate(a.lower_t, np.zeros_like(t), t)
        if a.upper is not None:
            hi_t[:, i] = evaluate(a.upper_t, np.zeros_like(t), t)
        s = trace.sigma[:, i].astype(float)
        free = 1.0 - s * s
        sens[:, i] = free * a.A * a.A / fxx
        drift[:, i] = (free * a.A * fxt[:, i] / fxx + bt
                       + a.A * s * 0.5 * (1.0 - s) * lo_t[:, i]
                       - a.A * s * 0.5 * (1.0 + s) * hi_t[:, i])

    dt_rec = np.diff(t)[:, None]
    steady = trace.sigma[1:] == trace.sigma[:-1]
    d_sens = np.abs(np.diff(sens, axis=0) / dt_rec)
    d_drift = np.abs(np.diff(drift, axis=0) / dt_rec)
    c1 = float(np.max(np.where(steady, d_sens, 0.0), initial=0.0))
    c2 = float(np.max(np.where(steady, d_drift, 0.0), initial=0.0))

    a_coef = np.array([a.A for a in scn.agents])
    fb_dual = g.kappa_dual * (b - a_coef[None, :] * trace.x)
    c3 = float(np.max(np.abs(-fb_dual + trace.y)))

    mean_fb = a_coef[None, :] * fb_dual.mean(axis=1, keepdims=True)
    if scn.algorithm == Algorithm.PROJ_FF:
        # switched composite: pinned agents swap the feedforward part for
        # their bound rates
        rate_mean = trace.y.mean(axis=1, keepdims=True)
        s = trace.sigma.astype(float)
        free = 1.0 - s * s
        composite = (
            -free * (a_coef[None, :] * rate_mean + fxt)
            - s * 0.5 * (1.0 - s) * lo_t
            + s * 0.5 * (1.0 + s) * hi_t
            - mean_fb
        )
    else:
        composite = -mean_fb
    c4 = float(np.max(np.abs(composite)))

    required = {
        "gamma_sens_sign": 2.0 * n * c1,
        "gamma_drift_sign": 2.0 * n * c2,
        "gamma_dual_sign": 2.0 * n * c3,
        "gamma_stat_sign": c4,
    }
    satisfied = {
        "gamma_sens_sign": g.gamma_sens[2] >= required["gamma_sens_sign"],
        "gamma_drift_sign": g.gamma_drift[2] >= required["gamma_drift_sign"],
        "gamma_dual_sign": g.gamma_dual[2] >= required["gamma_dual_sign"],
        "gamma_stat_sign": g.gamma_stat[2] >= required["gamma_stat_sign"],
    }
    return GainReport(c1, c2, c3, c4, required, satisfied)
