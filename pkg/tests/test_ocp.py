import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldempc import presets
from ldempc._optim import minimize_box
from ldempc.checks import brute_force_value
from ldempc.discount import CONSTANT, LINEAR
from ldempc.model import check_feasible, rollout
from ldempc.ocp import (INFEASIBLE, OPTIMAL, SolverOptions, cost_gradient, dpp_residual, evaluate_cost,
                        solve_dp_finite, solve_ocp, solve_smooth)

U1 = [0, 1, 0, 1, 0, 1, 0, 1]
U2 = [-1, 0, 1, 0, 1, 0, 1, 0]


@pytest.mark.parametrize("N, d, u, expected", [
    (2, LINEAR, U1, 1.0),
    (2, LINEAR, U2, 1.5),
    (3, CONSTANT, U1, 2.5),
    (3, CONSTANT, U2, 2.0),
])
def test_evaluate_cost_strategies(graph, N, d, u, expected):
    assert evaluate_cost(graph, -1, u[:N], d) == pytest.approx(expected, abs=1e-15)


def test_evaluate_cost_difference_n3(graph):
    diff = evaluate_cost(graph, -1, U1[:3], LINEAR) - evaluate_cost(graph, -1, U2[:3], LINEAR)
    assert diff == pytest.approx(-1 / 6, abs=1e-15)


def test_evaluate_cost_empty(graph, osc):
    assert evaluate_cost(graph, -1, [], LINEAR, T=0, N=3) == 0
    assert evaluate_cost(osc, np.zeros(2), np.zeros((3, 2)), LINEAR, T=0) == 0


def test_evaluate_cost_partial_horizon(graph):
    # T < N uses the weights of the N-horizon
    assert evaluate_cost(graph, -1, U1[:4], LINEAR, T=2, N=4) == pytest.approx(1.0 * 1 + 0.75 * 0)
    with pytest.raises(ValueError):
        evaluate_cost(graph, -1, U1[:4], LINEAR, T=5, N=4)


def test_dp_examples(graph):
    sol = solve_dp_finite(graph, -1, 2, LINEAR)
    assert list(sol.inputs) == [0, 1] and sol.value == 1.0 and sol.status == OPTIMAL
    assert solve_dp_finite(graph, -1, 3, CONSTANT).inputs[0] == -1
    for d in (LINEAR, CONSTANT):
        sol = solve_dp_finite(graph, 0, 1, d)
        assert list(sol.inputs) == [1] and sol.value == 0


def test_dp_value_table_recursion(graph):
    N = 6
    sol = solve_dp_finite(graph, -1, N, LINEAR)
    V = sol.value_table
    assert all(v == 0 for v in V[N].values())
    for k in range(N):
        w = (N - k) / N
        for x in graph.states:
            best = min(w * t.cost + V[k + 1][t.next_state] for t in graph.outgoing(x))
            assert V[k][x] == best


def test_dp_tie_break_first_declared():
    # both edges out of "a" cost the same; the first declared must win
    from ldempc.model import GraphModel
    m = GraphModel(("a", "b", "c"), (("a", "toc", "c", 1.0), ("a", "tob", "b", 1.0),
                                     ("b", "s", "b", 0.0), ("c", "s", "c", 0.0)))
    assert solve_dp_finite(m, "a", 3, LINEAR).inputs[0] == "toc"


def test_dp_infeasible_dead_end():
    from ldempc.model import GraphModel
    m = GraphModel((0, 1), ((0, 0, 1, 1.0), (1, 1, 1, 0.0)))
    assert solve_dp_finite(m, 0, 4, LINEAR).status == OPTIMAL


@pytest.mark.parametrize("N", range(1, 9))
@pytest.mark.parametrize("d", [LINEAR, CONSTANT], ids=str)
def test_dp_equals_brute_force(graph, N, d):
    for x in graph.states:
        # equal up to the rounding of a different summation order
        assert solve_dp_finite(graph, x, N, d).value == pytest.approx(
            brute_force_value(graph, x, N, d), abs=1e-12)


def test_dp_matches_independent_undiscounted(graph):
    # plain enumeration of input words over the label alphabet, no shared code
    labels = [-1, 0, 1]
    edges = {(s, a): (n, c) for s, a, n, c in presets.GRAPH_TRANSITIONS}
    for N in range(1, 7):
        best = np.inf
        for word in itertools.product(labels, repeat=N):
            x, tot = -1, 0.0
            for a in word:
                if (x, a) not in edges:
                    break
                x, c = edges[(x, a)]
                tot += c
            else:
                best = min(best, tot)
        assert solve_dp_finite(graph, -1, N, CONSTANT).value == best  # integer-valued, exact


@pytest.mark.parametrize("N", range(2, 11))
def test_dpp_graph(graph, N):
    for x in graph.states:
        for d in (LINEAR, CONSTANT):
            assert dpp_residual(graph, x, N, d) <= 1e-9


@pytest.mark.parametrize("name", ["oscillator", "growth"])
def test_gradient_matches_central_differences(name):
    m = presets.get_preset(name)
    rng = np.random.default_rng(7)
    N = 6
    for _ in range(10):
        if name == "oscillator":
            x0 = rng.uniform(-0.8, 0.8, 2)
            U = rng.uniform(-0.1, 0.1, size=(N, 2))
        else:
            x0 = rng.uniform(1.0, 4.0, 1)
            U = rng.uniform(0.5, 1.5, size=(N, 1))
        for d in (LINEAR, CONSTANT):
            g = cost_gradient(m, x0, U, d)
            fd = np.zeros_like(U)
            for idx in np.ndindex(U.shape):
                h = 1e-6
                Up, Um = U.copy(), U.copy()
                Up[idx] += h
                Um[idx] -= h
                fd[idx] = (evaluate_cost(m, x0, Up, d) - evaluate_cost(m, x0, Um, d)) / (2 * h)
            np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)


def test_oscillator_n27_undiscounted_stays(osc, x01):
    # few starts land in a leaving basin (value -4.48169); staying is better (-4.48256)
    sol = solve_smooth(osc, x01, 27, CONSTANT, SolverOptions(multistart=16))
    assert sol.status != INFEASIBLE
    assert sol.value < -4.4825
    np.testing.assert_allclose(osc.step(x01, sol.inputs[0]), x01, atol=1e-6)


def test_oscillator_n27_discounted_leaves(osc, x01):
    sol = solve_smooth(osc, x01, 27, LINEAR, SolverOptions(multistart=4))
    assert np.linalg.norm(osc.step(x01, sol.inputs[0]) - x01) > 1e-3


def test_growth_steady_state_turnpike(growth):
    from scipy.optimize import minimize

    xs = presets.growth_steady_state()
    sol = solve_smooth(growth, np.array([xs]), 10, CONSTANT)
    assert sol.status == OPTIMAL
    X = sol.traj.states[:, 0]
    # leaves the steady state only near the end of the horizon
    assert np.all(np.abs(X[:4] - xs) <= 1e-3)
    assert np.all(np.diff(np.abs(X[1:] - xs)) > 0)

    # independent oracle: scipy box-constrained quasi-Newton on the same cost
    def J(u):
        x, tot = xs, 0.0
        for uk in u:
            tot -= np.log(5 * x ** 0.34 - uk)
            x = uk
        return tot

    ref = minimize(J, np.full(10, xs), method="L-BFGS-B", bounds=[(0.1, 10)] * 10,
                   options={"ftol": 1e-15, "gtol": 1e-12})
    assert sol.value == pytest.approx(ref.fun, abs=1e-7)
    np.testing.assert_allclose(X[1:], ref.x, atol=1e-4)


def test_solution_invariants(osc, rng):
    x0 = np.array([0.3, -0.4])
    for d in (LINEAR, CONSTANT):
        sol = solve_smooth(osc, x0, 8, d)
        assert sol.value == pytest.approx(evaluate_cost(osc, x0, sol.inputs, d, 8, 8), abs=1e-10)
        np.testing.assert_array_equal(sol.traj.states, rollout(osc, x0, sol.inputs).states)
        assert check_feasible(osc, sol.traj, 1e-8).ok
        assert sol.stationarity_residual <= 1e-8


def test_smooth_dpp(osc, growth):
    assert dpp_residual(osc, np.array([0.2, 0.5]), 8, LINEAR) <= 1e-5
    assert dpp_residual(growth, np.array([1.0]), 8, LINEAR) <= 1e-5
    assert dpp_residual(growth, np.array([1.0]), 8, CONSTANT) <= 1e-5


def test_warm_start_length_checked(osc):
    with pytest.raises(ValueError):
        solve_smooth(osc, np.zeros(2), 5, LINEAR, warm_start=np.zeros((4, 2)))


def test_x0_outside_box(osc):
    with pytest.raises(ValueError):
        solve_smooth(osc, np.array([1.5, 0.0]), 5, LINEAR)


def test_infeasible_state_constraints():
    # x+ = x + u with |u| <= 0.1 cannot leave 0.95 without crossing x <= 1 ... unless pushed
    from ldempc.model import SmoothModel
    m = SmoothModel(1, 1, lambda x, u: x + 0.5, lambda x, u: x[0] ** 2, (-1.0, 1.0), (-0.1, 0.1))
    sol = solve_smooth(m, np.array([0.9]), 3, LINEAR)
    assert sol.status == INFEASIBLE


def test_multistart_is_deterministic(osc):
    opts = SolverOptions(multistart=3, seed=5)
    a = solve_smooth(osc, np.array([0.1, 0.2]), 10, LINEAR, opts)
    b = solve_smooth(osc, np.array([0.1, 0.2]), 10, LINEAR, opts)
    np.testing.assert_array_equal(a.inputs, b.inputs)


def test_solve_ocp_dispatch(graph, osc):
    assert solve_ocp(graph, -1, 2, LINEAR).inputs == [0, 1]
    assert solve_ocp(osc, np.zeros(2), 3, LINEAR).status == OPTIMAL


def test_inner_solver_monotone():
    # Rosenbrock in a box: accepted iterates never increase the objective
    def fg(z):
        x, y = z
        f = (1 - x) ** 2 + 100 * (y - x * x) ** 2
        return f, np.array([-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)])

    res = minimize_box(fg, np.array([-1.2, 1.0]), np.array([-2.0, -2.0]), np.array([0.9, 2.0]),
                       keep_history=True)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-12 * (1 + np.abs(h[:-1])))
    np.testing.assert_allclose(res.z, [0.9, 0.81], atol=1e-6)


@settings(max_examples=15, deadline=None)
@given(lo=st.floats(-3, 0), width=st.floats(0.1, 3), c=st.floats(-4, 4))
def test_inner_solver_box_quadratic(lo, width, c):
    # the projection of the unconstrained minimizer is the exact answer
    hi = lo + width
    target = np.array([c, -c / 2])

    def fg(z):
        return float(np.sum((z - target) ** 2)), 2 * (z - target)

    res = minimize_box(fg, np.full(2, lo), np.full(2, lo), np.full(2, hi))
    np.testing.assert_allclose(res.z, np.clip(target, lo, hi), atol=1e-7)
