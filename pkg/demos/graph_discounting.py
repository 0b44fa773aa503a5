"""Three-state graph: why linear discounting removes the closed-loop loss.

Compares the discounted and undiscounted cost of two input strategies from the
initial state -1, then runs both MPC schemes in closed loop and prints the
asymptotic average performance gap for a range of horizons.
"""
from ldempc import CONSTANT, LINEAR, aap_estimate, evaluate_cost, make_controller, run_closed_loop
from ldempc.presets import graph

model = graph()
L_STAR = 0.75  # average cost of the optimal 2-cycle 0 -> 1 -> 0

print("strategy cost difference J(go now) - J(wait one step)")
print(f"{'N':>3} {'discounted':>12} {'undiscounted':>13}")
for N in range(1, 11):
    go, wait = ([0, 1] * N)[:N], ([-1] + [0, 1] * N)[:N]
    d = evaluate_cost(model, -1, go, LINEAR) - evaluate_cost(model, -1, wait, LINEAR)
    u = evaluate_cost(model, -1, go, CONSTANT) - evaluate_cost(model, -1, wait, CONSTANT)
    print(f"{N:>3} {d:>12.6f} {u:>13.6f}")

# An undiscounted planner with an odd horizon ends up in the costly self-loop
# at state 1, while the discounted planner always settles on the 2-cycle.
print("\nclosed-loop gap AAP - l*")
for N in range(1, 11):
    gaps = []
    for spec in ("discounted", "undiscounted"):
        trace = run_closed_loop(model, make_controller(model, spec, N), -1, 30)
        gaps.append(aap_estimate(trace, 2) - L_STAR)
    print(f"N={N:>2}  discounted {gaps[0]:.2f}  undiscounted {gaps[1]:.2f}")
