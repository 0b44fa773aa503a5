"""Optimal growth model: the discounted gap shrinks like 1/N^2.

The undiscounted scheme is near-optimal here because the optimal behaviour is
a steady state; the discounted scheme pays a small price that vanishes
quadratically in the horizon.
"""
import numpy as np

from ldempc import aap_estimate, make_controller, run_closed_loop
from ldempc.presets import GROWTH_X0, growth, growth_steady_state

model = growth()
xs = growth_steady_state()
l_star = float(model.stage_costs(np.array([[xs]]), np.array([[xs]]))[0])
print(f"optimal steady state x* = {xs:.6f}, l* = {l_star:.6f}")

Ns, gaps = [5, 10, 20, 40], []
for N in Ns:
    trace = run_closed_loop(model, make_controller(model, "discounted", N), np.array([GROWTH_X0]), 60)
    gaps.append(aap_estimate(trace, 1) - l_star)
    print(f"N={N:>3}  gap {gaps[-1]:.3e}  final state {trace.state_array()[-1, 0]:.6f}")

slope = np.polyfit(np.log(Ns), np.log(gaps), 1)[0]
print(f"log-log slope {slope:.2f} (quadratic decay gives -2)")
