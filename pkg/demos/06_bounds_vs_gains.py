"""How the analytic settling bounds respond to gains and topology.

The base time constant scales with 1/eta2 (algebraic connectivity), the
consensus bounds with the inverse square root of the gain products. This
script prints the ladder for a few variations of the 6-agent scenario.
"""

import dataclasses

from tvalloc import builtin_scenario, complete, ring, settling_bounds
from tvalloc.graph import CommGraph

base = builtin_scenario("case1")

print(f"{'variant':<34s} {'t0':>8s} {'t_rate':>8s} {'t_dual':>8s} {'t_sol':>8s}")


def row(name, scn):
    b = settling_bounds(scn)
    print(f"{name:<34s} {b.t0:8.4f} {b.t_rate_max:8.4f} "
          f"{b.t_dual_max:8.4f} {b.t_sol_max:8.4f}")


row("ring (eta2 = 1)", base)
row("complete graph (eta2 = 6)",
    dataclasses.replace(base, graph=complete(6)))
row("bipartite K33 (eta2 = 3)",
    dataclasses.replace(base, graph=CommGraph(
        6, [(i, j) for i in (0, 2, 4) for j in (1, 3, 5)])))

g = base.gains
row("estimator gains x100",
    dataclasses.replace(base, gains=dataclasses.replace(
        g, gamma_sens=(1000.0, 1000.0, 1.0), gamma_drift=(1000.0, 1000.0, 1.0))))
row("stationarity gains x4",
    dataclasses.replace(base, gains=dataclasses.replace(
        g, gamma_stat=(4.0, 4.0, 10.0))))

print("\nt0 = pi q n^(p/2q) / (2 p eta2); the consensus bounds divide it by")
print("sqrt(gain products); the solving bound adds the stationarity term.")
