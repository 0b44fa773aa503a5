"""Optimal periodic orbits, period scans and distances to orbits."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Optional

import numpy as np

from . import _optim
from .model import DomainError, GraphModel, SmoothModel, rollout
from .ocp import INFEASIBLE, MAX_ITER, OPTIMAL, SolverOptions, cost_floor

__all__ = ["PeriodicOrbit", "ScanResult", "ORBIT_TOL", "SCAN_TOL", "distance", "state_distance",
           "is_minimal", "best_orbit", "scan_periods", "minimum_mean_cycle", "orbit_points"]

ORBIT_TOL = 1e-8
SCAN_TOL = 1e-6


@dataclass
class PeriodicOrbit:
    """``p`` state/input pairs closed under the dynamics.

    ``states``/``inputs`` are labels for graph models and ``(p, n)``/``(p, m)``
    arrays for smooth models.
    """

    p: int
    states: Any
    inputs: Any
    avg_cost: float
    minimal: bool
    status: str = OPTIMAL
    violation: float = 0.0
    model: Any = None

    @property
    def points(self) -> list:
        return list(zip(self.states, self.inputs))


@dataclass
class ScanResult:
    orbits: list
    p_star: Optional[int]
    l_star: float

    @property
    def best(self) -> Optional[PeriodicOrbit]:
        return None if self.p_star is None else self.orbits[self.p_star - 1]


def orbit_points(orbit: PeriodicOrbit, model=None):
    """Numeric ``(p, n)`` state and ``(p, m)`` input arrays of an orbit."""
    model = model if model is not None else orbit.model
    if isinstance(model, GraphModel):
        X = np.array([model.embed_state(s) for s in orbit.states])
        U = np.array([model.embed_input(u) for u in orbit.inputs])
        return X, U
    return np.asarray(orbit.states, float), np.asarray(orbit.inputs, float)


def _embed(model, x, u):
    if isinstance(model, GraphModel):
        return model.embed_state(x), (None if u is None else model.embed_input(u))
    return np.atleast_1d(np.asarray(x, float)), (None if u is None else np.atleast_1d(np.asarray(u, float)))


def distance(x, u, orbit: PeriodicOrbit, model=None) -> float:
    """``min_k ||(x, u) - Π(k)||`` (Euclidean on the concatenated pair)."""
    model = model if model is not None else orbit.model
    X, U = orbit_points(orbit, model)
    xv, uv = _embed(model, x, u)
    d = np.sum((X - xv) ** 2, axis=1) + np.sum((U - uv) ** 2, axis=1)
    return float(np.sqrt(np.min(d)))


def state_distance(x, orbit: PeriodicOrbit, model=None) -> float:
    """``min_k ||x - Π_X(k)||``."""
    model = model if model is not None else orbit.model
    X, _ = orbit_points(orbit, model)
    xv, _ = _embed(model, x, None)
    return float(np.sqrt(np.min(np.sum((X - xv) ** 2, axis=1))))


def is_minimal(orbit: PeriodicOrbit, tol: float = ORBIT_TOL, model=None) -> bool:
    model = model if model is not None else orbit.model
    if isinstance(model, GraphModel):
        return len(set(orbit.states)) == len(orbit.states)
    X, _ = orbit_points(orbit, model)
    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            if np.linalg.norm(X[i] - X[j]) <= tol:
                return False
    return True


# -- graphs -------------------------------------------------------------------

def _best_graph_orbit(model: GraphModel, p: int) -> PeriodicOrbit:
    """Cheapest closed walk of length exactly ``p`` (ties: first start state, first transition)."""
    best = None
    for s0 in model.states:
        # D[k][v]: cheapest walk of length k from s0 to v, with back-pointers
        D = {s0: (0.0, None)}
        layers = [D]
        for _ in range(p):
            nxt: dict = {}
            for v, (c, _) in layers[-1].items():
                for t in model.outgoing(v):
                    cand = c + t.cost
                    if t.next_state not in nxt or cand < nxt[t.next_state][0]:
                        nxt[t.next_state] = (cand, (v, t.input))
            layers.append(nxt)
        if s0 in layers[-1] and (best is None or layers[-1][s0][0] < best[0]):
            best = (layers[-1][s0][0], s0, layers)
    if best is None:
        return PeriodicOrbit(p, [], [], np.inf, False, INFEASIBLE, np.inf, model)
    total, s0, layers = best
    states, inputs, v = [], [], s0
    for k in range(p, 0, -1):
        prev, a = layers[k][v][1]
        states.append(prev)
        inputs.append(a)
        v = prev
    states.reverse()
    inputs.reverse()
    avg = sum(model.cost(s, a) for s, a in zip(states, inputs)) / p
    orb = PeriodicOrbit(p, states, inputs, avg, False, OPTIMAL, 0.0, model)
    orb.minimal = is_minimal(orb)
    return orb


def minimum_mean_cycle(model: GraphModel):
    """Karp's algorithm: ``(ℓ*, cycle_states)`` over all cycles of the transition graph."""
    idx = {s: i for i, s in enumerate(model.states)}
    n = len(idx)
    edges = [(idx[t.state], idx[t.next_state], t.cost - model.cost_offset) for t in model.transitions]
    # D[k][v]: min cost of a walk with exactly k edges ending at v (virtual source to all)
    D = np.full((n + 1, n), np.inf)
    P = np.full((n + 1, n), -1, dtype=int)
    D[0] = 0.0
    for k in range(1, n + 1):
        for a, b, c in edges:
            if D[k - 1, a] + c < D[k, b]:
                D[k, b] = D[k - 1, a] + c
                P[k, b] = a
    best, arg = np.inf, -1
    for v in range(n):
        if not np.isfinite(D[n, v]):
            continue
        worst = max((D[n, v] - D[k, v]) / (n - k) for k in range(n) if np.isfinite(D[k, v]))
        if worst < best:
            best, arg = worst, v
    if arg < 0:
        return np.inf, []
    # walk back from (n, arg); a repeated vertex closes a minimum-mean cycle
    walk, v = [], arg
    for k in range(n, 0, -1):
        walk.append(v)
        v = P[k, v]
    walk.append(v)
    walk.reverse()
    seen: dict = {}
    for i, v in enumerate(walk):
        if v in seen:
            cyc = walk[seen[v]:i]
            return float(best), [model.states[j] for j in cyc]
        seen[v] = i
    return float(best), []


# -- smooth models ------------------------------------------------------------

class _OrbitProblem:
    """Variables ``z = (x_0..x_{p-1}, u_0..u_{p-1})``; periodicity as equalities."""

    def __init__(self, model: SmoothModel, p: int):
        self.model, self.p = model, p
        self.n, self.m = model.n, model.m

    def split(self, z):
        p, n = self.p, self.n
        return z[:p * n].reshape(p, n), z[p * n:].reshape(p, self.m)

    def evaluate(self, z):
        X, U = self.split(z)
        c = self.model.stage_costs(X, U)
        Xn = self.model.dynamics(X, U) if self.model.vectorized else \
            np.array([self.model.step(x, u) for x, u in zip(X, U)])
        h = (np.roll(X, -1, axis=0) - Xn).ravel()
        g = self.model.guard_values(X, U)
        ineq = np.zeros(0) if g is None else self.model.guard_margin - g
        return float(np.mean(c)), ineq, h

    def gradient(self, z, w_in, w_eq):
        X, U = self.split(z)
        model = self.model
        lx, lu = model.cost_gradients(X, U)
        gX = lx / self.p
        gU = lu / self.p
        W = np.asarray(w_eq).reshape(self.p, self.n)
        fx, fu = model.jacobians(X, U)
        gX = gX + np.roll(W, 1, axis=0) - np.einsum("ki,kij->kj", W, fx)
        gU = gU - np.einsum("ki,kij->kj", W, fu)
        if model.domain_guard is not None and len(w_in) and np.any(w_in):
            hx, hu = model.guard_gradients(X, U)
            gX = gX - w_in[:, None] * hx
            gU = gU - w_in[:, None] * hu
        return np.concatenate([gX.ravel(), gU.ravel()])


def _orbit_starts(model: SmoothModel, p: int, count: int, rng):
    init = model.meta.get("orbit_init")
    (xlo, xhi), (ulo, uhi) = model.x_bounds, model.u_bounds
    u0 = np.clip(np.zeros(model.m), ulo, uhi)
    for i in range(count):
        if init is not None and i % 2 == 0:
            X, U = init(p, rng)
        else:
            X = rng.uniform(xlo, xhi, size=(p, model.n))
            U = np.tile(u0, (p, 1))
        yield np.concatenate([np.asarray(X, float).ravel(), np.asarray(U, float).ravel()])


def _best_smooth_orbit(model: SmoothModel, p: int, opts: SolverOptions, starts: int) -> PeriodicOrbit:
    lmin = cost_floor(model)
    shifted = replace(model, cost_offset=model.cost_offset + lmin)
    prob = _OrbitProblem(shifted, p)
    lo = np.concatenate([np.tile(model.x_bounds[0], p), np.tile(model.u_bounds[0], p)])
    hi = np.concatenate([np.tile(model.x_bounds[1], p), np.tile(model.u_bounds[1], p)])
    rng = np.random.default_rng([opts.seed, p])
    best = None
    for i, z0 in enumerate(_orbit_starts(model, p, starts, rng)):
        try:
            res = _optim.augmented_lagrangian(
                prob, z0, lo, hi, tol_stat=opts.tol_stat, tol_feas=ORBIT_TOL, max_iter=opts.max_iter,
                max_outer=max(opts.max_outer, 12), rho0=opts.rho0, growth=opts.penalty_growth,
                memory=opts.memory)
        except DomainError:
            continue
        feasible = res.violation <= ORBIT_TOL
        key = (not feasible, res.violation if not feasible else 0.0, res.f)
        if best is None or key < best[0]:
            best = (key, res)
    if best is None:
        return PeriodicOrbit(p, np.zeros((0, model.n)), np.zeros((0, model.m)), np.nan, False,
                             INFEASIBLE, np.inf, model)
    res = best[1]
    X, U = prob.split(res.z)
    avg = float(np.mean(model.stage_costs(X, U)))
    if res.violation > ORBIT_TOL:
        status = INFEASIBLE
    else:
        status = OPTIMAL if res.stat <= opts.tol_stat else MAX_ITER
    orb = PeriodicOrbit(p, X.copy(), U.copy(), avg, False, status, res.violation, model)
    orb.minimal = is_minimal(orb)
    return orb


def best_orbit(model, p: int, opts: Optional[SolverOptions] = None, starts: int = 20) -> PeriodicOrbit:
    """Cheapest feasible ``p``-periodic orbit (exact for graphs, multistart local for smooth)."""
    if p < 1:
        raise ValueError("period must be >= 1")
    if isinstance(model, GraphModel):
        return _best_graph_orbit(model, p)
    return _best_smooth_orbit(model, p, opts or SolverOptions(), starts)


def scan_periods(model, p_max: int, opts: Optional[SolverOptions] = None, starts: int = 20,
                 scan_tol: float = SCAN_TOL) -> ScanResult:
    """``best_orbit`` for every ``p`` in ``1..p_max``; ``p*`` is the smallest near-minimizer."""
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    orbits = []
    for p in range(1, p_max + 1):
        try:
            orbits.append(best_orbit(model, p, opts, starts))
        except (ValueError, FloatingPointError) as exc:  # recorded, not fatal
            orbits.append(PeriodicOrbit(p, [], [], np.nan, False, f"error: {exc}", np.inf, model))
    costs = np.array([o.avg_cost if o.status in (OPTIMAL, MAX_ITER) else np.inf for o in orbits])
    if not np.any(np.isfinite(costs)):
        return ScanResult(orbits, None, np.nan)
    lstar = float(np.min(costs))
    p_star = int(np.flatnonzero(costs <= lstar + scan_tol)[0]) + 1
    return ScanResult(orbits, p_star, lstar)


def check_orbit(model, orbit: PeriodicOrbit) -> float:
    """Largest gap between the rollout of the orbit inputs from ``Π_X(0)`` and the orbit states."""
    if isinstance(model, GraphModel):
        tr = rollout(model, orbit.states[0], orbit.inputs)
        return 0.0 if list(tr.states[:-1]) == list(orbit.states) and tr.states[-1] == orbit.states[0] else np.inf
    X = np.asarray(orbit.states)
    tr = rollout(model, X[0], orbit.inputs)
    closed = np.vstack([X[1:], X[:1]])
    return float(np.max(np.abs(tr.states[1:] - closed)))
