"""Symbolic expressions in (x, t): parsing, exact derivatives, evaluation.

Every cost, activity and bound in a scenario is one of these expression
trees, so the whole simulator differentiates its problem data exactly.
"""

import numpy as np

from tvalloc import differentiate, evaluate, parse_expr, to_text

cost = parse_expr("(1 + 0.1*3)*x^2 + 0.2*sin(0.1*3*t)*x^2")
print("cost f(x,t)      :", to_text(cost))

fx = differentiate(cost, "x")
fxx = differentiate(fx, "x")
fxt = differentiate(fx, "t")
print("f_x              :", to_text(fx))
print("f_xx at (2, 0)   :", evaluate(fxx, 2.0, 0.0), "(= 2*(1+0.3))")
print("f_xt at (2, 0)   :", evaluate(fxt, 2.0, 0.0), "(= 0.4*0.3*cos(0)*2)")

activity = parse_expr("10*3 + 5*sin(0.1*3*t) + 0.1*3*t")
rate = differentiate(activity, "t")
print("activity b(t)    :", to_text(activity))
print("b_t              :", to_text(rate))

# cross-check a derivative against a central finite difference
t0, h = 7.0, 1e-6
fd = (evaluate(activity, 0.0, t0 + h) - evaluate(activity, 0.0, t0 - h)) / (2 * h)
print(f"b_t(7) symbolic  : {evaluate(rate, 0.0, t0):.10f}")
print(f"b_t(7) numeric   : {fd:.10f}")

# expressions round-trip through their text form
assert parse_expr(to_text(fxt)) == fxt
print("print->parse round trip: exact")

# evaluation broadcasts over numpy arrays
ts = np.linspace(0.0, 10.0, 5)
print("b(t) on a grid   :", np.round(evaluate(activity, 0.0, ts), 3))
