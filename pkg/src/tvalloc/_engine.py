"""Jit-compiled integrator core.

Expressions are flattened to postfix programs (tvalloc.expr.compile_program)
and interpreted by a tiny stack machine inside the kernel, so one compiled
kernel serves every scenario. Arithmetic is written to match the reference
vector fields in tvalloc.dynamics operation-for-operation: consensus sums
accumulate edge-by-edge over the sorted edge list, per-agent terms keep the
same grouping, which makes the two paths agree to machine precision.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .expr import compile_program
from .scenario import Algorithm, Scenario

# program slots per agent
SLOT_FX = 0
SLOT_FXX = 1
SLOT_FXT = 2
SLOT_B = 3
SLOT_BT = 4
SLOT_LO = 5
SLOT_LOT = 6
SLOT_HI = 7
SLOT_HIT = 8
N_SLOTS = 9

STACK_CAP = 64

STATUS_OK = 0
STATUS_NONCONVEX = 1
STATUS_EMPTY_BOX = 2
STATUS_DIVERGED = 3

EVENT_CAP = 200_000


def build_tables(scn: Scenario) -> dict:
    """Flatten scenario expressions and topology into kernel arrays."""
    zero_prog = compile_program(("const", 0.0))
    code_parts = []
    const_parts = []
    pptr = [0]
    nrow = 0
    ncst = 0
    for a in scn.agents:
        exprs = [
            a.cost_x, a.cost_xx, a.cost_xt, a.activity, a.activity_t,
            a.lower if a.lower is not None else None,
            a.lower_t if a.lower is not None else None,
            a.upper if a.upper is not None else None,
            a.upper_t if a.upper is not None else None,
        ]
        for e in exprs:
            code, consts, depth = compile_program(e) if e is not None else zero_prog
            if depth >= STACK_CAP:
                raise ValueError("expression too deep for the evaluation stack")
            code = code.copy()
            code[:, 1] += np.where(np.isin(code[:, 0], (0, 8)), ncst, 0)
            code_parts.append(code)
            const_parts.append(consts)
            nrow += len(code)
            ncst += len(consts)
            pptr.append(nrow)
    edges = scn.graph.sorted_edges()
    g = scn.gains
    gains_vec = np.array(
        list(g.gamma_sens) + list(g.gamma_drift) + list(g.gamma_dual)
        + list(g.gamma_stat) + [g.kappa_x, g.kappa_dual, g.epsilon, g.p_over_q],
        dtype=np.float64,
    )
    return {
        "code": np.concatenate(code_parts).astype(np.int32),
        "consts": (np.concatenate(const_parts) if ncst else np.zeros(0)).astype(np.float64),
        "pptr": np.asarray(pptr, dtype=np.int32),
        "has_lo": np.asarray([a.lower is not None for a in scn.agents], dtype=np.uint8),
        "has_hi": np.asarray([a.upper is not None for a in scn.agents], dtype=np.uint8),
        "A": np.asarray([a.A for a in scn.agents], dtype=np.float64),
        "edges_i": np.asarray([e[0] for e in edges], dtype=np.int32),
        "edges_j": np.asarray([e[1] for e in edges], dtype=np.int32),
        "gains": gains_vec,
        "alg": 1 if scn.algorithm == Algorithm.PROJ_FF else 0,
    }


@njit(cache=True, inline="always")
def _eval(code, consts, start, end, x, t, stack):
    sp = 0
    for k in range(start, end):
        op = code[k, 0]
        arg = code[k, 1]
        if op == 0:
            stack[sp] = consts[arg]
            sp += 1
        elif op == 1:
            stack[sp] = x
            sp += 1
        elif op == 2:
            stack[sp] = t
            sp += 1
        elif op == 3:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] + stack[sp]
        elif op == 4:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] - stack[sp]
        elif op == 5:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] * stack[sp]
        elif op == 6:
            sp -= 1
            stack[sp - 1] = stack[sp - 1] / stack[sp]
        elif op == 7:
            stack[sp - 1] = -stack[sp - 1]
        elif op == 8:
            stack[sp - 1] = stack[sp - 1] ** consts[arg]
        elif op == 9:
            stack[sp - 1] = np.sin(stack[sp - 1])
        else:
            stack[sp - 1] = np.cos(stack[sp - 1])
    return stack[0]


@njit(cache=True, inline="always")
def _sig_pow(v, alpha):
    if v > 0.0:
        return v ** alpha
    if v < 0.0:
        return -((-v) ** alpha)
    return 0.0


@njit(cache=True, inline="always")
def _sgn(v, delta):
    if delta > 0.0:
        return v / (abs(v) + delta)
    if v > 0.0:
        return 1.0
    if v < 0.0:
        return -1.0
    return 0.0


@njit(cache=True)
def _field(code, consts, pptr, has_lo, has_hi, A, edges_i, edges_j, gains,
           alg, smooth, x, lam, th, thp, t,
           dx, dlam, dth, dthp, y, e, sig, lo_arr, hi_arr,
           sens_est, drift_est, stack):
    """Evaluate one vector field; returns (status, bad_agent, imbalance)."""
    n = x.shape[0]
    gs1, gs2, gs3 = gains[0], gains[1], gains[2]
    gd1, gd2, gd3 = gains[3], gains[4], gains[5]
    gl1, gl2, gl3 = gains[6], gains[7], gains[8]
    ge1, ge2, ge3 = gains[9], gains[10], gains[11]
    kx = gains[12]
    kd = gains[13]
    eps = gains[14]
    pq = gains[15]
    plo = 1.0 - pq
    phi = 1.0 + pq

    imbalance = 0.0
    for i in range(n):
        base = i * N_SLOTS
        fx = _eval(code, consts, pptr[base + SLOT_FX], pptr[base + SLOT_FX + 1], x[i], t, stack)
        fxx = _eval(code, consts, pptr[base + SLOT_FXX], pptr[base + SLOT_FXX + 1], x[i], t, stack)
        if not fxx > 0.0:
            return STATUS_NONCONVEX, i, 0.0
        fxt = _eval(code, consts, pptr[base + SLOT_FXT], pptr[base + SLOT_FXT + 1], x[i], t, stack)
        b = _eval(code, consts, pptr[base + SLOT_B], pptr[base + SLOT_B + 1], 0.0, t, stack)
        bt = _eval(code, consts, pptr[base + SLOT_BT], pptr[base + SLOT_BT + 1], 0.0, t, stack)

        lo = -np.inf
        hi = np.inf
        lo_t = 0.0
        hi_t = 0.0
        if has_lo[i] == 1:
            lo = _eval(code, consts, pptr[base + SLOT_LO], pptr[base + SLOT_LO + 1], 0.0, t, stack)
            lo_t = _eval(code, consts, pptr[base + SLOT_LOT], pptr[base + SLOT_LOT + 1], 0.0, t, stack)
        if has_hi[i] == 1:
            hi = _eval(code, consts, pptr[base + SLOT_HI], pptr[base + SLOT_HI + 1], 0.0, t, stack)
            hi_t = _eval(code, consts, pptr[base + SLOT_HIT], pptr[base + SLOT_HIT + 1], 0.0, t, stack)
        lo_arr[i] = lo
        hi_arr[i] = hi
        if lo > hi:
            return STATUS_EMPTY_BOX, i, 0.0

        if alg == 0:
            err = fx + A[i] * lam[i]
            fb_x = kx * (ge1 * _sig_pow(err, plo) + ge2 * _sig_pow(err, phi)
                         + ge3 * _sgn(err, smooth)) / fxx
            mode = 0
        else:
            kkt_step = kx * (fx + A[i] * lam[i])
            tentative = x[i] - kkt_step
            if tentative <= lo:
                mode = -1
            elif tentative >= hi:
                mode = 1
            else:
                mode = 0
            proj = min(max(tentative, lo), hi)
            err = x[i] - proj
            fb_x = (ge1 * _sig_pow(err, plo) + ge2 * _sig_pow(err, phi)
                    + ge3 * _sgn(err, smooth)) / fxx
        sig[i] = mode
        e[i] = err

        s = float(mode)
        free = 1.0 - s * s
        if mode == 0:
            sens = A[i] * A[i] / fxx
            drift = A[i] * fxt / fxx + bt
        else:
            sens = 0.0
            drift = (bt + A[i] * s * 0.5 * (1.0 - s) * lo_t
                     - A[i] * s * 0.5 * (1.0 + s) * hi_t)
        sens_est[i] = th[i] + sens
        drift_est[i] = thp[i] - drift

        fb_dual = kd * (b - A[i] * x[i])
        imbalance += A[i] * x[i] - b

        # stash per-agent pieces; consensus terms are added after this loop
        if sens_est[i] >= eps:
            rate = drift_est[i] / sens_est[i]
        else:
            rate = 0.0
        y[i] = rate
        if mode == 0:
            ffx = -(A[i] * rate + fxt) / fxx
        else:
            ffx = -s * 0.5 * (1.0 - s) * lo_t + s * 0.5 * (1.0 + s) * hi_t
        dx[i] = -fb_x + ffx
        dlam[i] = -fb_dual + rate
        dth[i] = 0.0
        dthp[i] = 0.0

    for k in range(edges_i.shape[0]):
        i = edges_i[k]
        j = edges_j[k]
        d = sens_est[i] - sens_est[j]
        c = gs1 * _sig_pow(d, plo) + gs2 * _sig_pow(d, phi) + gs3 * _sgn(d, smooth)
        dth[i] -= c
        dth[j] += c
        d = drift_est[i] - drift_est[j]
        c = gd1 * _sig_pow(d, plo) + gd2 * _sig_pow(d, phi) + gd3 * _sgn(d, smooth)
        dthp[i] -= c
        dthp[j] += c
        d = lam[i] - lam[j]
        c = gl1 * _sig_pow(d, plo) + gl2 * _sig_pow(d, phi) + gl3 * _sgn(d, smooth)
        dlam[i] -= c
        dlam[j] += c

    return STATUS_OK, -1, imbalance


@njit(cache=True)
def _run(code, consts, pptr, has_lo, has_hi, A, edges_i, edges_j, gains,
         alg, method, smooth, x, lam, th, thp, t0, dt, nsteps, decim,
         div_guard,
         rec_t, rec_x, rec_lam, rec_y, rec_e, rec_sig, rec_imb, rec_cons,
         rec_thsum, rec_thpsum,
         ev_step, ev_agent, ev_from, ev_to,
         feas_entry, feas_viol):
    n = x.shape[0]
    stack = np.empty(STACK_CAP)
    dx = np.empty(n)
    dlam = np.empty(n)
    dth = np.empty(n)
    dthp = np.empty(n)
    y = np.empty(n)
    e = np.empty(n)
    sig = np.zeros(n, dtype=np.int8)
    prev_sig = np.zeros(n, dtype=np.int8)
    lo_arr = np.empty(n)
    hi_arr = np.empty(n)
    sens_est = np.empty(n)
    drift_est = np.empty(n)

    # rk4 scratch
    xs = np.empty(n)
    lams = np.empty(n)
    ths = np.empty(n)
    thps = np.empty(n)
    dx2 = np.empty(n)
    dlam2 = np.empty(n)
    dth2 = np.empty(n)
    dthp2 = np.empty(n)
    dxa = np.empty(n)
    dlama = np.empty(n)
    dtha = np.empty(n)
    dthpa = np.empty(n)
    y2 = np.empty(n)
    e2 = np.empty(n)
    sig2 = np.zeros(n, dtype=np.int8)
    se2 = np.empty(n)
    de2 = np.empty(n)
    lo2 = np.empty(n)
    hi2 = np.empty(n)

    n_events = 0
    n_rec = 0

    for k in range(nsteps + 1):
        t = t0 + k * dt

        for i in range(n):
            if (abs(x[i]) > div_guard or abs(lam[i]) > div_guard
                    or abs(th[i]) > div_guard or abs(thp[i]) > div_guard):
                return STATUS_DIVERGED, k, i, n_events, n_rec

        status, bad, imb = _field(
            code, consts, pptr, has_lo, has_hi, A, edges_i, edges_j, gains,
            alg, smooth, x, lam, th, thp, t,
            dx, dlam, dth, dthp, y, e, sig, lo_arr, hi_arr,
            sens_est, drift_est, stack)
        if status != STATUS_OK:
            return status, k, bad, n_events, n_rec

        if alg == 1:
            if k > 0:
                for i in range(n):
                    if sig[i] != prev_sig[i]:
                        if n_events < ev_step.shape[0]:
                            ev_step[n_events] = k
                            ev_agent[n_events] = i
                            ev_from[n_events] = prev_sig[i]
                            ev_to[n_events] = sig[i]
                        n_events += 1
            for i in range(n):
                prev_sig[i] = sig[i]
                if has_lo[i] == 1 or has_hi[i] == 1:
                    viol = max(lo_arr[i] - x[i], x[i] - hi_arr[i])
                    if viol < 0.0:
                        viol = 0.0
                    if feas_entry[i] < 0:
                        if viol == 0.0:
                            feas_entry[i] = k
                    elif viol > feas_viol[i]:
                        feas_viol[i] = viol

        if k % decim == 0 or k == nsteps:
            rec_t[n_rec] = t
            lam_min = lam[0]
            lam_max = lam[0]
            th_sum = 0.0
            thp_sum = 0.0
            for i in range(n):
                rec_x[n_rec, i] = x[i]
                rec_lam[n_rec, i] = lam[i]
                rec_y[n_rec, i] = y[i]
                rec_e[n_rec, i] = e[i]
                rec_sig[n_rec, i] = sig[i]
                if lam[i] < lam_min:
                    lam_min = lam[i]
                if lam[i] > lam_max:
                    lam_max = lam[i]
                th_sum += th[i]
                thp_sum += thp[i]
            rec_imb[n_rec] = imb
            rec_cons[n_rec] = lam_max - lam_min
            rec_thsum[n_rec] = th_sum
            rec_thpsum[n_rec] = thp_sum
            n_rec += 1

        if k == nsteps:
            break

        if method == 0:
            for i in range(n):
                x[i] += dt * dx[i]
                lam[i] += dt * dlam[i]
                th[i] += dt * dth[i]
                thp[i] += dt * dthp[i]
        else:
            # classic rk4; sub-stage switching signals are not logged
            for i in range(n):
                dxa[i] = dx[i]
                dlama[i] = dlam[i]
                dtha[i] = dth[i]
                dthpa[i] = dthp[i]
            for stage in range(3):
                h = 0.5 * dt if stage < 2 else dt
                w = 2.0 if stage < 2 else 1.0
                ts = t + h
                for i in range(n):
                    xs[i] = x[i] + h * dx2[i] if stage > 0 else x[i] + h * dx[i]
                    lams[i] = lam[i] + h * dlam2[i] if stage > 0 else lam[i] + h * dlam[i]
                    ths[i] = th[i] + h * dth2[i] if stage > 0 else th[i] + h * dth[i]
                    thps[i] = thp[i] + h * dthp2[i] if stage > 0 else thp[i] + h * dthp[i]
                status, bad, _ = _field(
                    code, consts, pptr, has_lo, has_hi, A, edges_i, edges_j,
                    gains, alg, smooth, xs, lams, ths, thps, ts,
                    dx2, dlam2, dth2, dthp2, y2, e2, sig2, lo2, hi2,
                    se2, de2, stack)
                if status != STATUS_OK:
                    return status, k, bad, n_events, n_rec
                for i in range(n):
                    dxa[i] += w * dx2[i]
                    dlama[i] += w * dlam2[i]
                    dtha[i] += w * dth2[i]
                    dthpa[i] += w * dthp2[i]
            for i in range(n):
                x[i] += dt * dxa[i] / 6.0
                lam[i] += dt * dlama[i] / 6.0
                th[i] += dt * dtha[i] / 6.0
                thp[i] += dt * dthpa[i] / 6.0

    return STATUS_OK, nsteps, -1, n_events, n_rec
