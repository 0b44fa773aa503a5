"""System models: dynamics, stage costs and constraint sets.

Two variants are supported. :class:`GraphModel` is a finite transition system
whose states and inputs are opaque labels with numeric embeddings (needed for
distances to periodic orbits). :class:`SmoothModel` is a continuous-state
system with box constraints and an optional scalar domain guard on the stage
cost.

Smooth closures follow a numpy convention: state/input arguments have the
state/input on the last axis, so a closure written with ``x[..., 0]`` style
indexing works both on single points and on stacked ``(K, n)`` arrays. Set
``vectorized=True`` when that holds; otherwise the helpers loop.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Hashable, Optional, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "TransitionError",
    "Transition",
    "GraphModel",
    "SmoothModel",
    "Trajectory",
    "FeasibilityReport",
    "rollout",
    "check_feasible",
    "stage_cost",
    "shift_cost_nonneg",
    "fd_step",
]


class DomainError(ValueError):
    """Stage cost evaluated outside its domain of definition."""


class TransitionError(ValueError):
    """Input label has no transition from the current graph state."""


@dataclass(frozen=True)
class Transition:
    state: Hashable
    input: Hashable
    next_state: Hashable
    cost: float


def _as_vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=float))


@dataclass(frozen=True, eq=False)
class GraphModel:
    """Finite transition system.

    ``transitions`` order matters: it is the tie-breaking order used by the
    exact DP solver. Embeddings default to ``float(label)`` for numeric labels.
    """

    states: tuple
    transitions: tuple
    state_embedding: dict = field(default_factory=dict)
    input_embedding: dict = field(default_factory=dict)
    cost_offset: float = 0.0
    name: str = "graph"

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(
            self, "transitions",
            tuple(t if isinstance(t, Transition) else Transition(*t) for t in self.transitions))
        known = set(self.states)
        if len(known) != len(self.states):
            raise ValueError("duplicate state labels")
        for t in self.transitions:
            if t.state not in known or t.next_state not in known:
                raise ValueError(f"transition {t} references an unknown state")
            if not np.isfinite(t.cost):
                raise ValueError(f"transition {t} has non-finite cost")
        sources = {t.state for t in self.transitions}
        missing = [s for s in self.states if s not in sources]
        if missing:
            raise ValueError(f"states without outgoing transitions: {missing}")
        # index: state -> {input -> transition}; first declaration wins
        index: dict = {s: {} for s in self.states}
        for t in self.transitions:
            index[t.state].setdefault(t.input, t)
        object.__setattr__(self, "_index", index)

    @property
    def n(self) -> int:
        return len(self.embed_state(self.states[0]))

    def embed_state(self, s) -> np.ndarray:
        return _as_vec(self.state_embedding.get(s, s))

    def embed_input(self, u) -> np.ndarray:
        return _as_vec(self.input_embedding.get(u, u))

    def outgoing(self, s) -> list:
        """Transitions leaving ``s`` in declaration order."""
        return list(self._index[s].values())

    def transition(self, s, u) -> Transition:
        try:
            return self._index[s][u]
        except KeyError:
            raise TransitionError(f"no transition from state {s!r} with input {u!r}") from None

    def step(self, s, u):
        return self.transition(s, u).next_state

    def cost(self, s, u) -> float:
        return self.transition(s, u).cost - self.cost_offset


@dataclass(frozen=True, eq=False)
class SmoothModel:
    """Continuous-state model ``x+ = dynamics(x, u)`` with box constraints.

    Optional analytic derivatives:

    * ``dynamics_jac(x, u) -> (fx, fu)`` with shapes ``(..., n, n)``, ``(..., n, m)``
    * ``cost_grad(x, u) -> (lx, lu)``
    * ``guard_grad(x, u) -> (gx, gu)``

    Missing derivatives fall back to central differences.
    """

    n: int
    m: int
    dynamics: Callable
    stage_cost: Callable
    x_bounds: tuple
    u_bounds: tuple
    domain_guard: Optional[Callable] = None
    guard_margin: float = 1e-6
    dynamics_jac: Optional[Callable] = None
    cost_grad: Optional[Callable] = None
    guard_grad: Optional[Callable] = None
    vectorized: bool = False
    cost_offset: float = 0.0
    name: str = "smooth"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        xlo, xhi = (np.broadcast_to(_as_vec(b), (self.n,)).copy() for b in self.x_bounds)
        ulo, uhi = (np.broadcast_to(_as_vec(b), (self.m,)).copy() for b in self.u_bounds)
        if np.any(xlo > xhi) or np.any(ulo > uhi):
            raise ValueError("bounds must satisfy lo <= hi componentwise")
        for a in (xlo, xhi, ulo, uhi):
            a.setflags(write=False)
        object.__setattr__(self, "x_bounds", (xlo, xhi))
        object.__setattr__(self, "u_bounds", (ulo, uhi))

    # -- batched evaluation helpers (used by the solvers) -----------------

    def _map(self, fn, X, U):
        if self.vectorized:
            return np.asarray(fn(X, U), dtype=float)
        return np.array([fn(x, u) for x, u in zip(X, U)], dtype=float)

    def guard_values(self, X, U) -> Optional[np.ndarray]:
        if self.domain_guard is None:
            return None
        return self._map(self.domain_guard, np.atleast_2d(X), np.atleast_2d(U)).reshape(-1)

    def stage_costs(self, X, U) -> np.ndarray:
        """Stage costs for stacked ``(K, n)``, ``(K, m)`` arrays; raises on domain violation."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        U = np.atleast_2d(np.asarray(U, dtype=float))
        g = self.guard_values(X, U)
        if g is not None:
            bad = np.flatnonzero(~(g >= self.guard_margin))
            if bad.size:
                k = int(bad[0])
                raise DomainError(
                    f"{self.name}: domain guard {g[k]:.3e} < margin {self.guard_margin:g} "
                    f"at stage {k}")
        c = self._map(self.stage_cost, X, U).reshape(-1) - self.cost_offset
        if not np.all(np.isfinite(c)):
            raise DomainError(f"{self.name}: non-finite stage cost")
        return c

    def step(self, x, u) -> np.ndarray:
        return np.asarray(self.dynamics(np.asarray(x, float), np.asarray(u, float)), dtype=float)

    def jacobians(self, X, U):
        """``(fx, fu)`` stacked over stages."""
        X = np.atleast_2d(X)
        U = np.atleast_2d(U)
        if self.dynamics_jac is not None:
            if self.vectorized:
                fx, fu = self.dynamics_jac(X, U)
                K = X.shape[0]
                return (np.broadcast_to(fx, (K, self.n, self.n)),
                        np.broadcast_to(fu, (K, self.n, self.m)))
            pairs = [self.dynamics_jac(x, u) for x, u in zip(X, U)]
            return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])
        return _fd_jac(lambda x, u: self.step(x, u), X, U, self.n)

    def cost_gradients(self, X, U):
        X = np.atleast_2d(X)
        U = np.atleast_2d(U)
        if self.cost_grad is not None:
            return _stacked_grad(self.cost_grad, X, U, self.vectorized)
        fx, fu = _fd_jac(lambda x, u: np.atleast_1d(self.stage_cost(x, u)), X, U, 1)
        return fx[:, 0, :], fu[:, 0, :]

    def guard_gradients(self, X, U):
        X = np.atleast_2d(X)
        U = np.atleast_2d(U)
        if self.guard_grad is not None:
            return _stacked_grad(self.guard_grad, X, U, self.vectorized)
        fx, fu = _fd_jac(lambda x, u: np.atleast_1d(self.domain_guard(x, u)), X, U, 1)
        return fx[:, 0, :], fu[:, 0, :]


def _stacked_grad(fn, X, U, vectorized):
    if vectorized:
        gx, gu = fn(X, U)
        return (np.broadcast_to(np.asarray(gx, float), X.shape),
                np.broadcast_to(np.asarray(gu, float), U.shape))
    pairs = [fn(x, u) for x, u in zip(X, U)]
    return (np.array([np.asarray(p[0], float) for p in pairs]),
            np.array([np.asarray(p[1], float) for p in pairs]))


def fd_step(z) -> np.ndarray:
    """Central-difference step ``1e-6 * (1 + |z|)``."""
    return 1e-6 * (1.0 + np.abs(z))


def _fd_jac(fn, X, U, rows):
    K, n = X.shape
    m = U.shape[1]
    fx = np.empty((K, rows, n))
    fu = np.empty((K, rows, m))
    for k in range(K):
        x, u = X[k], U[k]
        hx, hu = fd_step(x), fd_step(u)
        for i in range(n):
            e = np.zeros(n)
            e[i] = hx[i]
            fx[k, :, i] = (np.asarray(fn(x + e, u)) - np.asarray(fn(x - e, u))) / (2 * hx[i])
        for j in range(m):
            e = np.zeros(m)
            e[j] = hu[j]
            fu[k, :, j] = (np.asarray(fn(x, u + e)) - np.asarray(fn(x, u - e))) / (2 * hu[j])
    return fx, fu


@dataclass
class Trajectory:
    """States ``x_u(0..T, x0)`` and the inputs that produced them."""

    states: Any
    inputs: Any

    def __len__(self) -> int:
        return len(self.inputs)


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    violation: float
    index: Optional[int]
    kind: str = ""


def rollout(model, x0, u: Sequence) -> Trajectory:
    """Apply ``u`` from ``x0``; constraints are not checked here."""
    if isinstance(model, GraphModel):
        if x0 not in model._index:
            raise ValueError(f"unknown state {x0!r}")
        states = [x0]
        for uk in u:
            states.append(model.step(states[-1], uk))
        return Trajectory(states, list(u))
    x0 = _as_vec(x0)
    if x0.shape != (model.n,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({model.n},)")
    U = np.asarray(u, dtype=float)
    U = U.reshape(0, model.m) if U.size == 0 else U.reshape(len(U), -1)
    if U.shape[1] != model.m:
        raise ValueError(f"inputs have width {U.shape[1]}, expected {model.m}")
    X = np.empty((len(U) + 1, model.n))
    X[0] = x0
    for k in range(len(U)):
        X[k + 1] = model.step(X[k], U[k])
    return Trajectory(X, U)


def check_feasible(model, traj: Trajectory, tol: float = 1e-8) -> FeasibilityReport:
    """Worst violation of state box, input box and domain guard along ``traj``."""
    if isinstance(model, GraphModel):
        # rollout only follows declared transitions, so graph trajectories are feasible
        return FeasibilityReport(True, 0.0, None)
    X = np.asarray(traj.states, float).reshape(-1, model.n)
    U = np.asarray(traj.inputs, float).reshape(-1, model.m)
    (xlo, xhi), (ulo, uhi) = model.x_bounds, model.u_bounds
    worst, where, kind = 0.0, None, ""
    checks = [
        ("state", np.maximum(X - xhi, xlo - X).max(axis=1) if len(X) else np.zeros(0)),
        ("input", np.maximum(U - uhi, ulo - U).max(axis=1) if len(U) else np.zeros(0)),
    ]
    if model.domain_guard is not None and len(U):
        checks.append(("guard", model.guard_margin - model.guard_values(X[:len(U)], U)))
    for name, v in checks:
        if v.size and np.max(v) > worst:
            worst, where, kind = float(np.max(v)), int(np.argmax(v)), name
    return FeasibilityReport(worst <= tol, worst, where, kind)


def stage_cost(model, x, u) -> float:
    """``ℓ(x, u)``; raises :class:`DomainError` outside the cost domain."""
    if isinstance(model, GraphModel):
        return model.cost(x, u)
    return float(model.stage_costs(_as_vec(x)[None], _as_vec(u)[None])[0])


def shift_cost_nonneg(model, grid: int = 64, refine: int = 8, steps: int = 50):
    """Return ``(model', ℓ_min)`` where ``model'`` has stage cost ``ℓ - ℓ_min``.

    Smooth models: ``grid**(n+m)`` uniform samples over the feasible box
    (points violating the guard are skipped), then ``steps`` projected-gradient
    steps from the ``refine`` best samples.
    """
    if isinstance(model, GraphModel):
        lmin = min(t.cost for t in model.transitions) - model.cost_offset
        if lmin == 0:
            return model, 0.0
        return replace(model, cost_offset=model.cost_offset + lmin), lmin
    lmin, _ = _smooth_cost_floor(model, grid, refine, steps)
    return replace(model, cost_offset=model.cost_offset + lmin), lmin


def _smooth_cost_floor(model: SmoothModel, grid: int, refine: int, steps: int):
    (xlo, xhi), (ulo, uhi) = model.x_bounds, model.u_bounds
    lo = np.concatenate([xlo, ulo])
    hi = np.concatenate([xhi, uhi])
    d = lo.size
    axes = [np.linspace(a, b, grid) if b > a else np.array([a]) for a, b in zip(lo, hi)]
    n = model.n
    best_v = np.full(refine, np.inf)
    best_z = np.zeros((refine, d))
    # chunk over the first axis to bound memory
    if d > 1:
        mesh = np.meshgrid(*axes[1:], indexing="ij")
        rest_pts = np.column_stack([a.reshape(-1) for a in mesh])
    else:
        rest_pts = np.zeros((1, 0))
    for a0 in axes[0]:
        Z = np.column_stack([np.full(len(rest_pts), a0), rest_pts])
        v = _safe_costs(model, Z[:, :n], Z[:, n:])
        if np.any(np.isneginf(v)):
            raise ValueError(f"{model.name}: stage cost unbounded below on the feasible box")
        cand_v = np.concatenate([best_v, v])
        cand_z = np.vstack([best_z, Z])
        order = np.argsort(cand_v, kind="stable")[:refine]
        best_v, best_z = cand_v[order], cand_z[order]
    if not np.isfinite(best_v[0]):
        raise ValueError(f"{model.name}: no sample inside the cost domain")
    for i in range(len(best_z)):
        if not np.isfinite(best_v[i]):
            continue
        z, v = best_z[i].copy(), best_v[i]
        step = 0.1 * np.max(hi - lo)
        for _ in range(steps):
            gx, gu = model.cost_gradients(z[None, :n], z[None, n:])
            g = np.concatenate([gx[0], gu[0]])
            while step > 1e-14:
                zt = np.clip(z - step * g, lo, hi)
                vt = _safe_costs(model, zt[None, :n], zt[None, n:])[0]
                if vt < v:
                    z, v = zt, vt
                    step *= 2.0
                    break
                step *= 0.5
        best_v[i], best_z[i] = v, z
    k = int(np.argmin(best_v))
    return float(best_v[k]), best_z[k]


def _safe_costs(model: SmoothModel, X, U) -> np.ndarray:
    """Raw stage costs with +inf outside the guard domain."""
    X = np.atleast_2d(X)
    U = np.atleast_2d(U)
    out = np.full(len(X), np.inf)
    ok = np.ones(len(X), bool)
    g = model.guard_values(X, U)
    if g is not None:
        ok = g >= model.guard_margin
    if np.any(ok):
        with np.errstate(all="ignore"):
            c = model._map(model.stage_cost, X[ok], U[ok]).reshape(-1) - model.cost_offset
        c = np.where(np.isnan(c), np.inf, c)
        out[ok] = c
    return out
