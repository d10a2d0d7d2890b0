"""The centralized oracle: frozen-time optima and analytic trajectory rates.

solve_frozen bisects the dual balance; on separable quadratics it must agree
with the closed form to machine precision. oracle_rates gives the analytic
time-derivatives of the optimum, including pinned agents whose rate is just
the slope of their active bound; central finite differences confirm both.
The quadratic-penalty ladder shows the stiff-penalty problem converging to
the projected one.
"""

import math

import numpy as np

from tvalloc import builtin_scenario, oracle_rates, penalty_check, solve_frozen

scn = builtin_scenario("case1")
sol = solve_frozen(scn, 0.0)
cs = [(1 + 0.1 * i) for i in range(1, 7)]
lam_cf = -2 * 210.0 / sum(1 / c for c in cs)
print(f"dual at t=0: solver {sol.lam:.8f}  closed form {lam_cf:.8f}")
print("allocations:", np.round(sol.x, 4))

t = 25.0
sol = solve_frozen(scn, t)
dx, dlam = oracle_rates(scn, t, sol)
h = 1e-5
fd = (solve_frozen(scn, t + h).lam - solve_frozen(scn, t - h).lam) / (2 * h)
print(f"\ndual rate at t=25: analytic {dlam:.6f}  finite difference {fd:.6f}")

scn2 = builtin_scenario("case2")
for t in (5.0, 46.0):
    sol2 = solve_frozen(scn2, t)
    dx2, _ = oracle_rates(scn2, t, sol2)
    tag = {1: "upper", -1: "lower", 0: "free"}[int(sol2.active[5])]
    print(f"t={t:4.1f}: agent 6 {tag}-pinned, x6*={sol2.x[5]:.3f}, rate {dx2[5]:.3f}")

print("\nquadratic-penalty ladder at t=30 (gap to the projected optimum):")
for eta, lam, gap in penalty_check(scn2, 30.0):
    print(f"  eta = {eta:8.0f}   dual {lam:.5f}   max gap {gap:.2e}")
