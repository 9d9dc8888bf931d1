"""Solve for first-order symmetries of the Yamabe operator symbolically and
confirm the coefficients against an independent polynomial fit."""

from ckt_prolong import flatpoly
from ckt_prolong.symmetry import solve_symmetry

rep = solve_symmetry("yamabe", 1)
print(rep.to_text())
print()
for n in (3, 4, 6):
    fit = flatpoly.fit_symmetry_coefficients("yamabe", 1, n)
    engine = {k: v(n) for k, v in rep.values().items()}
    print("n = %d: fit %s, engine %s, agree %s"
          % (n, {k: str(v) for k, v in fit.values.items()},
             {k: str(v) for k, v in engine.items()}, fit.values == engine))
