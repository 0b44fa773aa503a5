import numpy as np
import pytest

from ldempc.metrics import accumulated_cost
from ldempc.model import SmoothModel, stage_cost
from ldempc.mpc import Controller, make_controller
from ldempc.simulate import run_closed_loop


def test_graph_undiscounted_waits_forever(graph):
    tr = run_closed_loop(graph, make_controller(graph, "undiscounted", 3), -1, 10)
    assert tr.states == [-1] * 11 and tr.feasible and tr.halted_at is None


def test_graph_discounted_alternates(graph):
    tr = run_closed_loop(graph, make_controller(graph, "discounted", 3), -1, 10)
    assert tr.states == [-1] + [0, 1] * 5
    assert len(tr.inputs) == len(tr.stage_costs) == 10


def test_trace_invariants(osc):
    tr = run_closed_loop(osc, make_controller(osc, "discounted", 8), np.array([0.3, 0.2]), 12)
    for k in range(12):
        np.testing.assert_allclose(tr.states[k + 1], osc.step(tr.states[k], tr.inputs[k]), atol=0)
        assert tr.stage_costs[k] == stage_cost(osc, tr.states[k], tr.inputs[k])
    # replay: summing recomputed costs reproduces accumulated_cost exactly
    for T in (0, 5, 12):
        assert sum(stage_cost(osc, tr.states[k], tr.inputs[k]) for k in range(T)) == accumulated_cost(tr, T)


def test_halt_is_recorded():
    # drift of +0.5 per step leaves x <= 1 after one step from 0.9 whatever u does
    m = SmoothModel(1, 1, lambda x, u: x + 0.5 + u, lambda x, u: x[0] ** 2, (-1.0, 1.0), (-0.1, 0.1))
    tr = run_closed_loop(m, Controller(m, "discounted", 2), np.array([-0.9]), 10)
    assert not tr.feasible
    assert tr.halted_at is not None and tr.halted_at > 0
    assert len(tr.inputs) == tr.halted_at and len(tr.states) == tr.halted_at + 1


def test_keep_plans(graph):
    tr = run_closed_loop(graph, make_controller(graph, "pstep:2", 4), -1, 6, keep_plans=True)
    assert [d.reused for d in tr.diags] == [False, True] * 3
    assert all(d.plan is not None for d in tr.diags)
    tr2 = run_closed_loop(graph, make_controller(graph, "pstep:2", 4), -1, 6)
    assert all(d.plan is None for d in tr2.diags)


def test_negative_tsim(graph):
    with pytest.raises(ValueError):
        run_closed_loop(graph, make_controller(graph, "discounted", 3), -1, -1)


@pytest.mark.slow
def test_oscillator_undiscounted_stuck(osc, x01):
    tr = run_closed_loop(osc, make_controller(osc, "undiscounted", 27), x01, 60)
    assert tr.feasible
    for x in tr.states[-6:]:
        np.testing.assert_allclose(x, x01, atol=1e-4)
