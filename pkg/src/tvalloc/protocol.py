"""Pure scalar laws: signed fractional powers, the fixed-time consensus
operator, curvature/drift weightings (plain and switched), dual-rate
estimation, feedback and feedforward terms, and box projection.

Everything here is a pure function of its arguments; the assembled
multi-agent vector fields live in tvalloc.dynamics.
"""

from __future__ import annotations

import math

from .errors import EmptyBox, MissingBound, NonConvexSample
from .expr import evaluate
from .graph import CommGraph
from .scenario import AgentSpec, Gains


def sig_pow(v: float, alpha: float) -> float:
    """Sign-preserving power sign(v)*|v|**alpha (odd in v, zero at zero)."""
    if v > 0.0:
        return v ** alpha
    if v < 0.0:
        return -((-v) ** alpha)
    return 0.0


def _sign(v: float) -> float:
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


def consensus_term(
    i: int,
    values,
    g: CommGraph,
    gamma: tuple[float, float, float],
    p_over_q: float,
) -> float:
    """Fixed-time consensus operator for agent i over its neighbors.

    Zero when all neighbor values equal values[i]; odd in each pairwise
    difference, so summing over all agents with gamma[2] terms included
    cancels pairwise.
    """
    g1, g2, g3 = gamma
    lo, hi = 1.0 - p_over_q, 1.0 + p_over_q
    acc = 0.0
    vi = values[i]
    for j in g.neighbor_lists()[i]:
        d = vi - values[j]
        acc += g1 * sig_pow(d, lo) + g2 * sig_pow(d, hi) + g3 * _sign(d)
    return acc


def consensus_all(values, g: CommGraph, gamma, p_over_q: float):
    """Consensus operator for every agent, accumulated edge-by-edge in
    sorted-edge order so the total sums to exactly zero in floating point."""
    g1, g2, g3 = gamma
    lo, hi = 1.0 - p_over_q, 1.0 + p_over_q
    out = [0.0] * g.n
    for i, j in g.sorted_edges():
        d = values[i] - values[j]
        c = g1 * sig_pow(d, lo) + g2 * sig_pow(d, hi) + g3 * _sign(d)
        out[i] += c
        out[j] -= c
    return out


def _curvature(agent: AgentSpec, x: float, t: float, agent_id: int = -1) -> float:
    fxx = float(evaluate(agent.cost_xx, x, t))
    if not fxx > 0.0:
        raise NonConvexSample(agent_id, t)
    return fxx


def dual_sens(agent: AgentSpec, x: float, t: float, agent_id: int = -1) -> float:
    """Constraint-space inverse curvature A^2 / f_xx (>= 0)."""
    return agent.A * agent.A / _curvature(agent, x, t, agent_id)


def dual_drift(agent: AgentSpec, x: float, t: float, agent_id: int = -1) -> float:
    """Time-drift of the agent's constraint contribution: A f_xt / f_xx + b_t."""
    fxx = _curvature(agent, x, t, agent_id)
    fxt = float(evaluate(agent.cost_xt, x, t))
    bt = float(evaluate(agent.activity_t, 0.0, t))
    return agent.A * fxt / fxx + bt


def _bound_rates(agent: AgentSpec, t: float, mode: int) -> tuple[float, float]:
    """(g_lo_t, g_hi_t) as needed by the given mode; raises MissingBound."""
    lo_t = hi_t = 0.0
    if mode == -1:
        if agent.lower is None:
            raise MissingBound("mode -1 requires a lower bound")
        lo_t = float(evaluate(agent.lower_t, 0.0, t))
    elif mode == 1:
        if agent.upper is None:
            raise MissingBound("mode +1 requires an upper bound")
        hi_t = float(evaluate(agent.upper_t, 0.0, t))
    elif mode != 0:
        raise ValueError(f"mode must be in {{-1, 0, 1}}, got {mode}")
    return lo_t, hi_t


def dual_sens_mode(agent: AgentSpec, x: float, t: float, mode: int, agent_id: int = -1) -> float:
    """Switched inverse curvature: zero while the agent rides a bound."""
    _bound_rates(agent, t, mode)  # validates mode/bound pairing
    if mode != 0:
        _curvature(agent, x, t, agent_id)  # keep the convexity contract
        return 0.0
    return dual_sens(agent, x, t, agent_id)


def dual_drift_mode(agent: AgentSpec, x: float, t: float, mode: int, agent_id: int = -1) -> float:
    """Switched drift: a pinned agent contributes its bound rate instead of
    the curvature-weighted cost drift."""
    lo_t, hi_t = _bound_rates(agent, t, mode)
    fxx = _curvature(agent, x, t, agent_id)
    bt = float(evaluate(agent.activity_t, 0.0, t))
    if mode == 0:
        fxt = float(evaluate(agent.cost_xt, x, t))
        return agent.A * fxt / fxx + bt
    s = float(mode)
    return bt + agent.A * s * 0.5 * (1.0 - s) * lo_t - agent.A * s * 0.5 * (1.0 + s) * hi_t


def rate_estimate(sens_est: float, drift_est: float, epsilon: float) -> float:
    """Local dual-rate estimate drift_est / sens_est, gated to 0 below the
    singularity guard (the comparison is inclusive at epsilon)."""
    if sens_est >= epsilon:
        return drift_est / sens_est
    return 0.0


def ff_primal(agent: AgentSpec, x: float, t: float, rate: float, agent_id: int = -1) -> float:
    """Feedforward for x: cancels the predicted drift of the stationarity map."""
    fxx = _curvature(agent, x, t, agent_id)
    fxt = float(evaluate(agent.cost_xt, x, t))
    return -(agent.A * rate + fxt) / fxx


def ff_dual(rate: float) -> float:
    """Feedforward for the dual variable (the rate estimate itself)."""
    return rate


def ff_primal_mode(agent: AgentSpec, x: float, t: float, rate: float, mode: int, agent_id: int = -1) -> float:
    """Switched feedforward: a pinned agent follows its bound rate."""
    lo_t, hi_t = _bound_rates(agent, t, mode)
    if mode == 0:
        return ff_primal(agent, x, t, rate, agent_id)
    _curvature(agent, x, t, agent_id)
    s = float(mode)
    return -s * 0.5 * (1.0 - s) * lo_t + s * 0.5 * (1.0 + s) * hi_t


def fb_ff(agent: AgentSpec, x: float, t: float, lam_i: float, gains: Gains,
          agent_id: int = -1) -> tuple[float, float, float]:
    """Unconstrained feedback terms: (F_x, F_dual, stationarity error)."""
    fxx = _curvature(agent, x, t, agent_id)
    fx = float(evaluate(agent.cost_x, x, t))
    b = float(evaluate(agent.activity, 0.0, t))
    err = fx + agent.A * lam_i
    g1, g2, g3 = gains.gamma_stat
    pq = gains.p_over_q
    fb_x = gains.kappa_x * (
        g1 * sig_pow(err, 1.0 - pq) + g2 * sig_pow(err, 1.0 + pq) + g3 * _sign(err)
    ) / fxx
    fb_dual = gains.kappa_dual * (b - agent.A * x)
    return fb_x, fb_dual, err


def project_box(v: float, lo: float = -math.inf, hi: float = math.inf) -> float:
    """Clamp v to [lo, hi]; raises EmptyBox when the interval is empty."""
    if lo > hi:
        raise EmptyBox(f"empty box: lo={lo:.6g} > hi={hi:.6g}")
    return min(max(v, lo), hi)


def fb_proj(agent: AgentSpec, x: float, t: float, lam_i: float, gains: Gains,
            agent_id: int = -1) -> tuple[float, float, float, float, int]:
    """Projection-based feedback.

    Returns (kkt_step, F_x_applied, F_dual, proj_err, mode) where kkt_step is
    the raw stationarity force kappa_x*(f_x + A*lam), mode flags which bound
    the projected update pins (unbounded sides never trigger), and proj_err is
    x minus the projected tentative update.
    """
    fxx = _curvature(agent, x, t, agent_id)
    fx = float(evaluate(agent.cost_x, x, t))
    b = float(evaluate(agent.activity, 0.0, t))
    lo = float(evaluate(agent.lower, 0.0, t)) if agent.lower is not None else -math.inf
    hi = float(evaluate(agent.upper, 0.0, t)) if agent.upper is not None else math.inf
    kkt_step = gains.kappa_x * (fx + agent.A * lam_i)
    tentative = x - kkt_step
    if tentative <= lo:
        mode = -1
    elif tentative >= hi:
        mode = 1
    else:
        mode = 0
    err = x - project_box(tentative, lo, hi)
    g1, g2, g3 = gains.gamma_stat
    pq = gains.p_over_q
    fb_x = (
        g1 * sig_pow(err, 1.0 - pq) + g2 * sig_pow(err, 1.0 + pq) + g3 * _sign(err)
    ) / fxx
    fb_dual = gains.kappa_dual * (b - agent.A * x)
    return kkt_step, fb_x, fb_dual, err, mode
