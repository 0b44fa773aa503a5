import math

import networkx as nx
import numpy as np
import pytest

from ldempc import presets
from ldempc.model import GraphModel
from ldempc.orbit import (ORBIT_TOL, PeriodicOrbit, best_orbit, check_orbit, distance, is_minimal,
                          minimum_mean_cycle, scan_periods, state_distance)

L_STAR_OSC = -0.205615697834115
L1_OSC = -8.70791681846556e-4


@pytest.fixture(scope="module")
def osc_scan(osc):
    return scan_periods(osc, 12)


@pytest.fixture(scope="module")
def graph_orbit(graph):
    return best_orbit(graph, 2)


def test_graph_best_orbit_p2(graph_orbit):
    assert graph_orbit.avg_cost == 0.75
    assert set(graph_orbit.points) == {(0, 1), (1, 0)}
    assert graph_orbit.minimal


@pytest.mark.parametrize("p, cost", [(1, 1.0), (2, 0.75), (3, 1.0), (4, 0.75)])
def test_graph_orbits_by_period(graph, p, cost):
    o = best_orbit(graph, p)
    assert o.avg_cost == pytest.approx(cost, abs=1e-15)
    assert check_orbit(graph, o) == 0.0


def test_graph_scan(graph):
    res = scan_periods(graph, 4)
    assert res.p_star == 2 and res.l_star == 0.75


def test_graph_distance_examples(graph, graph_orbit):
    assert distance(-1, 0, graph_orbit) == pytest.approx(math.sqrt(2))
    assert distance(0, 1, graph_orbit) == 0
    assert state_distance(0, graph_orbit) == 0


def test_minimum_mean_cycle_against_networkx(graph):
    lstar, cycle = minimum_mean_cycle(graph)
    G = nx.MultiDiGraph()
    for t in graph.transitions:
        G.add_edge(t.state, t.next_state, cost=t.cost)
    best = math.inf
    for cyc in nx.simple_cycles(G):
        edges = list(zip(cyc, cyc[1:] + cyc[:1]))
        c = sum(min(d["cost"] for d in G.get_edge_data(a, b).values()) for a, b in edges)
        best = min(best, c / len(cyc))
    assert lstar == best == 0.75
    assert sorted(cycle) == [0, 1]


@pytest.mark.parametrize("seed", range(8))
def test_minimum_mean_cycle_random_graphs(seed):
    rng = np.random.default_rng(seed)
    states = list(range(4))
    trans = []
    for s in states:
        for a, t in enumerate(rng.choice(4, size=rng.integers(1, 4), replace=False)):
            trans.append((s, a, int(t), float(rng.integers(0, 10))))
    m = GraphModel(tuple(states), tuple(trans))
    G = nx.DiGraph()
    for s, _, t, c in trans:
        if not G.has_edge(s, t) or G[s][t]["cost"] > c:
            G.add_edge(s, t, cost=c)
    best = min(sum(G[a][b]["cost"] for a, b in zip(c, c[1:] + c[:1])) / len(c)
               for c in nx.simple_cycles(G))
    assert minimum_mean_cycle(m)[0] == pytest.approx(best, abs=1e-12)


def test_oscillator_scan(osc_scan):
    assert osc_scan.p_star == 6
    assert osc_scan.l_star == pytest.approx(L_STAR_OSC, abs=5e-3)
    costs = [o.avg_cost for o in osc_scan.orbits]
    assert costs[0] == pytest.approx(L1_OSC, abs=1e-6)
    assert costs[11] == pytest.approx(costs[5], abs=1e-6)


def test_oscillator_orbit_shape(osc_scan, osc):
    o = osc_scan.best
    expected = np.array([[-1, -0.5], [0, -1], [0.7, -0.5], [0.7, 0.5], [0, 1], [-1, 0.5]])
    for e in expected:
        assert state_distance(e, o) < 0.05
    assert is_minimal(o)
    assert check_orbit(osc, o) <= ORBIT_TOL
    assert o.avg_cost == pytest.approx(np.mean(osc.stage_costs(o.states, o.inputs)), abs=1e-10)
    k = 3
    assert distance(o.states[k], o.inputs[k], o) == 0


def test_multiples_not_worse(osc_scan):
    by_p = {o.p: o.avg_cost for o in osc_scan.orbits}
    for p in by_p:
        for k in range(2, 13):
            if k * p <= 12:
                assert by_p[k * p] <= by_p[p] + 1e-6


def test_two_lap_orbit_not_minimal(osc_scan, osc):
    o = osc_scan.best
    twice = PeriodicOrbit(12, np.vstack([o.states, o.states]), np.vstack([o.inputs, o.inputs]),
                          o.avg_cost, True, model=osc)
    assert not is_minimal(twice)
    assert is_minimal(osc_scan.orbits[0])


def test_growth_scan(growth):
    res = scan_periods(growth, 4)
    assert res.p_star == 1
    xs = presets.growth_steady_state()
    assert res.best.states[0, 0] == pytest.approx(xs, abs=1e-3)
    assert res.best.states[0, 0] == pytest.approx(2.23, abs=5e-3)


def test_invalid_period(graph):
    with pytest.raises(ValueError):
        best_orbit(graph, 0)
    with pytest.raises(ValueError):
        scan_periods(graph, 0)
