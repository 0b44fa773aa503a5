"""Oscillator: search for the best periodic orbit of each period.

The minimum average cost is attained by a period-6 orbit; multiples of 6 tie
with it and the optimal steady state is far worse.
"""
from ldempc.presets import oscillator
from ldempc.orbit import scan_periods

model = oscillator()
res = scan_periods(model, 12)
for p, orbit in enumerate(res.orbits, start=1):
    marker = "  <- p*" if p == res.p_star else ""
    print(f"p={p:>2}  average cost {orbit.avg_cost:+.10f}{marker}")
print(f"\nbest period {res.p_star}, l* = {res.l_star:.10f}")
print("states of the optimal orbit:")
print(res.best.states)
