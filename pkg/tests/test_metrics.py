import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldempc import presets
from ldempc.checks import random_inputs, random_storage
from ldempc.discount import CONSTANT, LINEAR, DiscountProfile
from ldempc.metrics import (aap_estimate, accumulated_cost, feasibility_margin, report, rotated_cost,
                            transient_performance, turnpike_count)
from ldempc.model import GraphModel, rollout
from ldempc.mpc import make_controller
from ldempc.ocp import OcpSolution, solve_dp_finite
from ldempc.orbit import best_orbit
from ldempc.simulate import ClosedLoopTrace, run_closed_loop

GRAPH = presets.graph()


@pytest.fixture(scope="module")
def disc_trace():
    return run_closed_loop(GRAPH, make_controller(GRAPH, "discounted", 3), -1, 10)


@pytest.fixture(scope="module")
def wait_trace():
    return run_closed_loop(GRAPH, make_controller(GRAPH, "undiscounted", 3), -1, 10)


@pytest.fixture(scope="module")
def orbit2():
    return best_orbit(GRAPH, 2)


def test_accumulated_cost(disc_trace, wait_trace):
    assert accumulated_cost(disc_trace, 3) == 2.5
    assert accumulated_cost(disc_trace, 0) == 0
    assert accumulated_cost(wait_trace, 5) == 5.0
    with pytest.raises(ValueError):
        accumulated_cost(disc_trace, 11)


def test_aap(disc_trace, wait_trace):
    assert aap_estimate(disc_trace, 2) == 0.75
    assert aap_estimate(wait_trace, 2) - 0.75 == 0.25


def test_aap_halted():
    tr = ClosedLoopTrace([0], [], [], feasible=False, halted_at=0)
    with pytest.raises(ValueError):
        aap_estimate(tr, 1)


def test_transient_on_orbit_is_zero():
    # trace sitting on the orbit from phase 0: costs telescope to p* l*
    tr = ClosedLoopTrace([0] * 3, [1, 0], [0.0, 1.5])
    assert transient_performance(tr, 2, 2, 0.75) == pytest.approx(0.0, abs=1e-9)


def test_transient_window_errors(disc_trace):
    with pytest.raises(ValueError):
        transient_performance(disc_trace, 5, 4, 0.75)
    with pytest.raises(ValueError):
        transient_performance(disc_trace, 5, 11, 0.75)


def test_transient_is_window_mean(disc_trace):
    vals = [accumulated_cost(disc_trace, T) - 0.75 * T for T in range(4, 9)]
    assert transient_performance(disc_trace, 4, 8, 0.75) == pytest.approx(np.mean(vals), abs=1e-15)


def test_turnpike_count_bounds(orbit2):
    on = solve_dp_finite(GRAPH, 0, 6, LINEAR)
    assert turnpike_count(on, orbit2, 1e-3) == 6
    off = OcpSolution([-1] * 4, rollout(GRAPH, -1, [-1] * 4), 4.0, "optimal")
    assert turnpike_count(off, orbit2, 0.5) == 0


@given(st.lists(st.floats(0, 3), min_size=2, max_size=5, unique=True))
def test_turnpike_monotone_in_eps(eps_list):
    orbit = best_orbit(GRAPH, 2)
    plan = solve_dp_finite(GRAPH, -1, 7, CONSTANT)
    counts = [turnpike_count(plan, orbit, e) for e in sorted(eps_list)]
    assert counts == sorted(counts)


def test_rotated_zero_storage(graph):
    u = [0, 1, 0, 1, 0]
    direct, ident, res = rotated_cost(graph, lambda x: 0.0, 0.75, -1, u, LINEAR)
    J = 1.0 * 1 + 0.8 * 0 + 0.6 * 1.5 + 0.4 * 0 + 0.2 * 1.5
    assert direct == pytest.approx(J - 3 * 0.75, abs=1e-12)
    assert res <= 1e-12


@pytest.mark.parametrize("N", [2, 4, 6, 8, 20])
def test_rotated_on_orbit_small(graph, N):
    lam0 = {-1: 0, 0: 0, 1: 0}
    # starting with the expensive edge the weighted sum is nonnegative
    from_one, _, _ = rotated_cost(graph, lam0, 0.75, 1, [0, 1] * (N // 2), LINEAR)
    assert 0 <= from_one <= 0.75
    # the other phase mirrors it
    from_zero, _, _ = rotated_cost(graph, lam0, 0.75, 0, [1, 0] * (N // 2), LINEAR)
    assert from_zero == pytest.approx(-from_one, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(1, 8), linear=st.booleans())
def test_rotated_identity_graph(seed, N, linear):
    rng = np.random.default_rng(seed)
    x0 = GRAPH.states[rng.integers(3)]
    u = random_inputs(GRAPH, x0, N, rng)
    lam = random_storage(GRAPH, rng)
    res = rotated_cost(GRAPH, lam, 0.75, x0, u, LINEAR if linear else CONSTANT, N)[2]
    assert res <= 1e-12


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(1, 30))
def test_rotated_identity_oscillator(seed, N):
    osc = presets.oscillator()
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(-1, 1, 2)
    u = random_inputs(osc, x0, N, rng)
    assert rotated_cost(osc, random_storage(osc, rng), -0.2056, x0, u, LINEAR)[2] <= 1e-9


def test_rotated_identity_custom_profile(graph):
    p = DiscountProfile.custom([1.0, 0.7, 0.7, 0.2])
    _, _, res = rotated_cost(graph, {-1: 3.0, 0: -1.0, 1: 0.5}, 0.75, -1, [-1, 0, 1, 0], p)
    assert res <= 1e-12


@pytest.mark.parametrize("N", range(2, 31))
def test_feasibility_margin_on_orbit(graph, N):
    m = feasibility_margin(graph, lambda x: 0.0, 0.0, 0.75, 2, 1.5, 0, N, M=0)
    V = solve_dp_finite(graph, 0, N, LINEAR).value
    assert m == pytest.approx(V - (N + 1) / 2 * 0.75 - 0.75 * 2, abs=1e-12)
    assert m <= 1e-12


@pytest.mark.parametrize("N", range(2, 31))
def test_feasibility_margin_from_minus_one(graph, N):
    assert feasibility_margin(graph, lambda x: 0.0, 0.0, 0.75, 2, 1.5, -1, N, M=1) <= 1e-12


def test_feasibility_margin_constant_cost():
    m = GraphModel(("a", "b"), (("a", 0, "b", 2.0), ("b", 0, "a", 2.0)))
    lam = {"a": 0.3, "b": -0.2}
    val = feasibility_margin(m, lam, 0.4, 2.0, 2, 2.0, "a", 6, M=3)
    assert val == pytest.approx(0.3 - 0.4 - 2.0 * 2, abs=1e-12)


def test_report(disc_trace, orbit2):
    tr = run_closed_loop(GRAPH, make_controller(GRAPH, "discounted", 4), -1, 30, keep_plans=True)
    r = report(tr, 0.75, 2, orbit=orbit2, model=GRAPH)
    assert r.aap_gap == 0 and np.isfinite(r.j_tr)
    assert r.J_T[3] == 2.5
    assert len(r.turnpike_counts[0.05]) == 30
