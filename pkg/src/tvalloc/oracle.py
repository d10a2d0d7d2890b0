"""Independent centralized oracle: the time-frozen optimum (x*(t), lam*(t))
and the analytic trajectory rates, used to measure tracking error.

The dual root is found by bracketing + safeguarded Newton/bisection on

    h(lam) = sum_i A_i * argmin_i(lam, t) - sum_i b_i(t),

which is monotone non-increasing in lam. A batch variant solves every
sampled instant of a trace at once with vectorized bisection; the scalar
and batch routes are cross-checked in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, NoBracket, NonConvexSample, SingularDenominator
from .expr import evaluate
from .protocol import project_box
from .scenario import AgentSpec, Scenario

ACTIVE_TOL = 1e-9
_BRACKET_START = 1e6
_BRACKET_LIMIT = 1e12
_X_LIMIT = 1e9


@dataclass(frozen=True)
class FrozenSolution:
    """Optimum of the time-frozen problem at one instant."""

    t: float
    x: np.ndarray
    lam: float
    active: np.ndarray  # -1 lower bound binds, +1 upper, 0 interior


def _grad(agent: AgentSpec, x: float, t: float, lam: float) -> float:
    return float(evaluate(agent.cost_x, x, t)) + agent.A * lam


def _curv(agent: AgentSpec, x: float, t: float) -> float:
    fxx = float(evaluate(agent.cost_xx, x, t))
    if not fxx > 0.0:
        raise NonConvexSample(-1, t)
    return fxx


def inner_argmin(agent: AgentSpec, lam: float, t: float,
                 x_hint: float | None = None) -> float:
    """Unique root of f_x(x,t) + A*lam = 0, clipped into the agent's box."""
    x0 = 0.0 if x_hint is None else float(x_hint)
    g0 = _grad(agent, x0, t, lam)
    if g0 == 0.0:
        root = x0
    else:
        # expand a bracket on the increasing gradient
        step = 1.0 + 0.1 * abs(x0)
        if g0 > 0.0:
            hi, lo = x0, x0 - step
            while _grad(agent, lo, t, lam) > 0.0:
                step *= 2.0
                lo = x0 - step
                if abs(lo) > _X_LIMIT:
                    raise NoBracket(f"no sign change within |x| <= {_X_LIMIT:g}")
        else:
            lo, hi = x0, x0 + step
            while _grad(agent, hi, t, lam) < 0.0:
                step *= 2.0
                hi = x0 + step
                if abs(hi) > _X_LIMIT:
                    raise NoBracket(f"no sign change within |x| <= {_X_LIMIT:g}")
        root = _newton_bisect(lambda v: _grad(agent, v, t, lam),
                              lambda v: _curv(agent, v, t), lo, hi)
    lo_b = float(evaluate(agent.lower, 0.0, t)) if agent.lower is not None else -math.inf
    hi_b = float(evaluate(agent.upper, 0.0, t)) if agent.upper is not None else math.inf
    return project_box(root, lo_b, hi_b)


def _newton_bisect(g, gprime, lo: float, hi: float) -> float:
    """Safeguarded root finding on an increasing g with g(lo)<=0<=g(hi)."""
    x = 0.5 * (lo + hi)
    for _ in range(200):
        gx = g(x)
        if gx == 0.0:
            return x
        if gx > 0.0:
            hi = x
        else:
            lo = x
        width = hi - lo
        if width <= 4.0 * np.finfo(float).eps * max(1.0, abs(x)):
            return x
        gp = gprime(x)
        if gp > 0.0:
            x_new = x - gx / gp
        else:
            x_new = 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        x = x_new
    return x


def _balance(scn: Scenario, lam: float, t: float,
             hints: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    xs = np.empty(scn.n)
    total = 0.0
    for i, a in enumerate(scn.agents):
        hint = None if hints is None else hints[i]
        try:
            xs[i] = inner_argmin(a, lam, t, x_hint=hint)
        except NoBracket:
            # root beyond the search limit: its sign still orients the
            # bisection, so substitute the capped (box-clipped) value
            cap = -_X_LIMIT if _grad(a, 0.0, t, lam) > 0.0 else _X_LIMIT
            lo_b = float(evaluate(a.lower, 0.0, t)) if a.lower is not None else -math.inf
            hi_b = float(evaluate(a.upper, 0.0, t)) if a.upper is not None else math.inf
            xs[i] = project_box(cap, lo_b, hi_b)
        total += a.A * xs[i] - float(evaluate(a.activity, 0.0, t))
    return total, xs


def solve_frozen(scn: Scenario, t: float,
                 lam_hint: float | None = None) -> FrozenSolution:
    """Frozen-time optimum via bisection on the monotone dual balance h."""
    if lam_hint is not None and math.isfinite(lam_hint):
        lo = lam_hint - 1.0
        hi = lam_hint + 1.0
    else:
        lo, hi = -_BRACKET_START, _BRACKET_START
    h_lo, _ = _balance(scn, lo, t)
    h_hi, _ = _balance(scn, hi, t)
    # h is non-increasing: need h(lo) >= 0 >= h(hi)
    width = hi - lo
    while h_lo < 0.0 or h_hi > 0.0:
        width *= 2.0
        if width > 2.0 * _BRACKET_LIMIT:
            raise Infeasible(f"no dual sign change within |lam| <= {_BRACKET_LIMIT:g}")
        if h_lo < 0.0:
            lo -= width
            h_lo, _ = _balance(scn, lo, t)
        if h_hi > 0.0:
            hi += width
            h_hi, _ = _balance(scn, hi, t)

    xs = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h_mid, xs = _balance(scn, mid, t, hints=xs)
        if h_mid > 0.0:
            lo = mid
        elif h_mid < 0.0:
            hi = mid
        else:
            lo = hi = mid
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    lam = 0.5 * (lo + hi)
    _, xs = _balance(scn, lam, t, hints=xs)

    active = np.zeros(scn.n, dtype=np.int8)
    for i, a in enumerate(scn.agents):
        if a.lower is not None and abs(xs[i] - float(evaluate(a.lower, 0.0, t))) <= ACTIVE_TOL:
            active[i] = -1
        elif a.upper is not None and abs(xs[i] - float(evaluate(a.upper, 0.0, t))) <= ACTIVE_TOL:
            active[i] = 1
    return FrozenSolution(t=t, x=xs, lam=lam, active=active)


def oracle_rates(scn: Scenario, t: float,
                 sol: FrozenSolution) -> tuple[np.ndarray, float]:
    """Analytic trajectory rates (dx*/dt per agent, dlam*/dt) at a frozen
    solution, treating sol.active as the switching mode. Unreliable within
    a few samples of an active-set change (the rates jump there)."""
    n = scn.n
    denom = 0.0
    numer = 0.0
    fxx = np.empty(n)
    fxt = np.empty(n)
    lo_t = np.zeros(n)
    hi_t = np.zeros(n)
    for i, a in enumerate(scn.agents):
        fxx[i] = _curv(a, sol.x[i], t)
        fxt[i] = float(evaluate(a.cost_xt, sol.x[i], t))
        bt = float(evaluate(a.activity_t, 0.0, t))
        s = float(sol.active[i])
        free = 1.0 - s * s
        if a.lower is not None:
            lo_t[i] = float(evaluate(a.lower_t, 0.0, t))
        if a.upper is not None:
            hi_t[i] = float(evaluate(a.upper_t, 0.0, t))
        denom += free * a.A * a.A / fxx[i]
        numer += (free * a.A * fxt[i] / fxx[i] + bt
                  + a.A * s * 0.5 * (1.0 - s) * lo_t[i]
                  - a.A * s * 0.5 * (1.0 + s) * hi_t[i])
    if denom < 1e-12:
        raise SingularDenominator("all agents pinned at t={:.6g}".format(t))
    dlam = -numer / denom
    dx = np.empty(n)
    for i, a in enumerate(scn.agents):
        s = float(sol.active[i])
        free = 1.0 - s * s
        dx[i] = (-free * (a.A * dlam + fxt[i]) / fxx[i]
                 - s * 0.5 * (1.0 - s) * lo_t[i]
                 + s * 0.5 * (1.0 + s) * hi_t[i])
    return dx, float(dlam)


# ---------------------------------------------------------------------------
# Batch solver (vectorized over sampled instants) used by sim's verify pass
# ---------------------------------------------------------------------------

def _argmin_batch(agent: AgentSpec, lam: np.ndarray, ts: np.ndarray) -> np.ndarray:
    """Per-instant inner argmin, vectorized bisection on the gradient."""
    lo = np.full_like(ts, -1.0)
    hi = np.full_like(ts, 1.0)
    for _ in range(64):
        g_lo = evaluate(agent.cost_x, lo, ts) + agent.A * lam
        g_hi = evaluate(agent.cost_x, hi, ts) + agent.A * lam
        need_lo = g_lo > 0.0
        need_hi = g_hi < 0.0
        if not (need_lo.any() or need_hi.any()):
            break
        lo = np.where(need_lo, np.maximum(2.0 * lo, -_X_LIMIT), lo)
        hi = np.where(need_hi, np.minimum(2.0 * hi, _X_LIMIT), hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        g = evaluate(agent.cost_x, mid, ts) + agent.A * lam
        hi = np.where(g >= 0.0, mid, hi)
        lo = np.where(g < 0.0, mid, lo)
    root = 0.5 * (lo + hi)
    if agent.lower is not None:
        root = np.maximum(root, evaluate(agent.lower, 0.0, ts))
    if agent.upper is not None:
        root = np.minimum(root, evaluate(agent.upper, 0.0, ts))
    return root


def _balance_batch(scn: Scenario, lam: np.ndarray, ts: np.ndarray) -> np.ndarray:
    total = np.zeros_like(ts)
    for a in scn.agents:
        total += a.A * _argmin_batch(a, lam, ts) - evaluate(a.activity, 0.0, ts)
    return total


def solve_frozen_batch(scn: Scenario, ts: np.ndarray
                       ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Frozen optima at every instant in ts: (x_star[R,n], lam_star[R], active)."""
    ts = np.asarray(ts, dtype=float)
    lo = np.full_like(ts, -_BRACKET_START)
    hi = np.full_like(ts, _BRACKET_START)
    width = 2.0 * _BRACKET_START
    while True:
        h_lo = _balance_batch(scn, lo, ts)
        h_hi = _balance_batch(scn, hi, ts)
        need_lo = h_lo < 0.0
        need_hi = h_hi > 0.0
        if not (need_lo.any() or need_hi.any()):
            break
        width *= 2.0
        if width > 2.0 * _BRACKET_LIMIT:
            raise Infeasible("no dual sign change in batch solve")
        lo = np.where(need_lo, lo - width, lo)
        hi = np.where(need_hi, hi + width, hi)
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        h = _balance_batch(scn, mid, ts)
        lo = np.where(h > 0.0, mid, lo)
        hi = np.where(h <= 0.0, mid, hi)
    lam = 0.5 * (lo + hi)

    n = scn.n
    x_star = np.empty((len(ts), n))
    active = np.zeros((len(ts), n), dtype=np.int8)
    for i, a in enumerate(scn.agents):
        xi = _argmin_batch(a, lam, ts)
        x_star[:, i] = xi
        if a.lower is not None:
            active[np.abs(xi - evaluate(a.lower, 0.0, ts)) <= ACTIVE_TOL, i] = -1
        if a.upper is not None:
            active[np.abs(xi - evaluate(a.upper, 0.0, ts)) <= ACTIVE_TOL, i] = 1
    return x_star, lam, active


# ---------------------------------------------------------------------------
# Quadratic-penalty cross-check (diagnostic only, never on the algorithm path)
# ---------------------------------------------------------------------------

def penalty_check(scn: Scenario, t: float,
                  etas=(1e2, 1e4, 1e6)) -> list[tuple[float, float, float]]:
    """Replace each box with a quadratic penalty of weight eta and re-solve;
    returns (eta, lam_penalized, max|x_penalized - x_frozen|) per eta. The
    gap should shrink as eta grows, witnessing that the projected problem
    and the stiff-penalty problem agree."""
    ref = solve_frozen(scn, t)
    out = []
    for eta in etas:
        lam, xs = _solve_penalized(scn, t, float(eta))
        out.append((float(eta), lam, float(np.max(np.abs(xs - ref.x)))))
    return out


def _pen_grad(agent: AgentSpec, x: float, t: float, lam: float, eta: float) -> float:
    g = _grad(agent, x, t, lam)
    if agent.lower is not None:
        lo = float(evaluate(agent.lower, 0.0, t))
        if x < lo:
            g += eta * (x - lo)
    if agent.upper is not None:
        hi = float(evaluate(agent.upper, 0.0, t))
        if x > hi:
            g += eta * (x - hi)
    return g


def _solve_penalized(scn: Scenario, t: float, eta: float) -> tuple[float, np.ndarray]:
    def balance(lam: float) -> tuple[float, np.ndarray]:
        xs = np.empty(scn.n)
        total = 0.0
        for i, a in enumerate(scn.agents):
            lo_x, hi_x = -1.0, 1.0
            while _pen_grad(a, lo_x, t, lam, eta) > 0.0:
                lo_x *= 2.0
                if abs(lo_x) > _X_LIMIT:
                    raise NoBracket("penalized gradient not bracketed")
            while _pen_grad(a, hi_x, t, lam, eta) < 0.0:
                hi_x *= 2.0
                if abs(hi_x) > _X_LIMIT:
                    raise NoBracket("penalized gradient not bracketed")
            for _ in range(200):
                mid = 0.5 * (lo_x + hi_x)
                if _pen_grad(a, mid, t, lam, eta) >= 0.0:
                    hi_x = mid
                else:
                    lo_x = mid
                if hi_x - lo_x <= 4.0 * np.finfo(float).eps * max(1.0, abs(mid)):
                    break
            xs[i] = 0.5 * (lo_x + hi_x)
            total += a.A * xs[i] - float(evaluate(a.activity, 0.0, t))
        return total, xs

    lo, hi = -_BRACKET_START, _BRACKET_START
    h_lo, _ = balance(lo)
    h_hi, _ = balance(hi)
    width = hi - lo
    while h_lo < 0.0 or h_hi > 0.0:
        width *= 2.0
        if width > 2.0 * _BRACKET_LIMIT:
            raise Infeasible("penalized dual not bracketed")
        if h_lo < 0.0:
            lo -= width
            h_lo, _ = balance(lo)
        if h_hi > 0.0:
            hi += width
            h_hi, _ = balance(hi)
    xs = None
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h_mid, xs = balance(mid)
        if h_mid > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    lam = 0.5 * (lo + hi)
    _, xs = balance(lam)
    return lam, xs
