"""Finite-horizon discounted optimal control problems.

``V_N(x) = min_u sum_k β_N(k) ℓ(x_u(k, x), u(k))`` over feasible input
sequences of length ``N``. Graph models are solved exactly by backward
recursion; smooth models by direct single shooting (projected quasi-Newton
on the input box, augmented Lagrangian for state box and domain guard).
"""
from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from . import _optim
from .discount import DiscountProfile, weights
from .model import (DomainError, GraphModel, SmoothModel, Trajectory, check_feasible,
                    rollout, shift_cost_nonneg)

__all__ = ["SolverOptions", "OcpSolution", "OPTIMAL", "MAX_ITER", "INFEASIBLE",
           "evaluate_cost", "solve_dp_finite", "solve_smooth", "solve_ocp",
           "cost_gradient", "dpp_residual", "cost_floor"]

OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverOptions:
    tol_stat: float = 1e-8
    tol_feas: float = 1e-8
    max_iter: int = 500
    max_outer: int = 8
    multistart: int = 0
    seed: int = 0
    memory: int = 10
    rho0: float = 10.0
    penalty_growth: float = 10.0
    # the solver works on the state box shrunk by this much, so that iterates
    # accepted at tol_feas do not drift out of the box along a closed loop
    backoff: float = 1e-7

    @classmethod
    def from_config(cls, cfg: dict) -> "SolverOptions":
        kw = {}
        for name, typ in (("tol_stat", float), ("tol_feas", float), ("max_iter", int),
                          ("multistart", int), ("seed", int), ("max_outer", int),
                          ("backoff", float)):
            if name in cfg:
                kw[name] = typ(cfg[name])
        return cls(**kw)


@dataclass
class OcpSolution:
    inputs: Any
    traj: Trajectory
    value: float
    status: str
    stationarity_residual: float = 0.0
    iterations: int = 0
    shifted_value: float = np.nan
    violation: float = 0.0
    multipliers: Optional[np.ndarray] = None
    value_table: Optional[list] = None
    start_index: int = 0
    history: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.inputs)


def evaluate_cost(model, x0, u, discount: DiscountProfile, T: Optional[int] = None,
                  N: Optional[int] = None) -> float:
    """``J_T^{β_N}(x0, u)``; defaults ``T = N = len(u)``."""
    if N is None:
        N = len(u) if T is None else T
    if T is None:
        T = N
    if T > N:
        raise ValueError(f"T={T} exceeds N={N}")
    if len(u) < T:
        raise ValueError(f"need at least {T} inputs, got {len(u)}")
    if T == 0:
        return 0.0
    traj = rollout(model, x0, list(u[:T]) if isinstance(model, GraphModel) else np.asarray(u)[:T])
    w = weights(discount, N)[:T]
    if isinstance(model, GraphModel):
        c = np.array([model.cost(s, a) for s, a in zip(traj.states, traj.inputs)])
    else:
        c = model.stage_costs(traj.states[:T], traj.inputs)
    return float(w @ c)


# -- exact DP for graphs ---------------------------------------------------

def solve_dp_finite(model: GraphModel, x0, N: int, discount: DiscountProfile) -> OcpSolution:
    """Backward recursion ``V_k(x) = min [β_N(k) ℓ + V_{k+1}(x+)]`` with ``V_N = 0``.

    Ties go to the first declared transition. ``value_table[k][x]`` holds ``V_k(x)``.
    """
    if not isinstance(model, GraphModel):
        raise TypeError("solve_dp_finite needs a GraphModel")
    if N < 1:
        raise ValueError("horizon must be >= 1")
    w = weights(discount, N)
    V = [None] * (N + 1)
    policy = [None] * N
    V[N] = {s: 0.0 for s in model.states}
    for k in range(N - 1, -1, -1):
        Vk, pk = {}, {}
        for s in model.states:
            best, arg = np.inf, None
            for t in model.outgoing(s):
                v = w[k] * (t.cost - model.cost_offset) + V[k + 1][t.next_state]
                if v < best:
                    best, arg = v, t.input
            Vk[s], pk[s] = best, arg
        V[k], policy[k] = Vk, pk
    if x0 not in V[0]:
        raise ValueError(f"unknown state {x0!r}")
    if not np.isfinite(V[0][x0]):
        return OcpSolution([], Trajectory([x0], []), np.inf, INFEASIBLE, value_table=V)
    inputs, s = [], x0
    for k in range(N):
        a = policy[k][s]
        inputs.append(a)
        s = model.step(s, a)
    traj = rollout(model, x0, inputs)
    # forward sum along the plan, so that value == evaluate_cost(plan) bit for bit
    value = evaluate_cost(model, x0, inputs, discount)
    return OcpSolution(inputs, traj, value, OPTIMAL, 0.0, 0, value, value_table=V)


# -- single shooting for smooth models ---------------------------------------

class _ShootingProblem:
    """Objective and constraints of the OCP as functions of the stacked inputs."""

    def __init__(self, model: SmoothModel, x0, N: int, w: np.ndarray, backoff: float = 0.0):
        self.model, self.x0, self.N, self.w = model, np.asarray(x0, float), N, w
        self.n, self.m = model.n, model.m
        xlo, xhi = model.x_bounds
        shrink = np.where(xhi - xlo > 4 * backoff, backoff, 0.0)
        self.xlo, self.xhi = xlo + shrink, xhi - shrink
        self._cache_z = None

    def _states(self, z):
        if self._cache_z is not None and np.array_equal(z, self._cache_z):
            return self._X
        U = z.reshape(self.N, self.m)
        X = np.empty((self.N + 1, self.n))
        X[0] = self.x0
        step = self.model.dynamics
        for k in range(self.N):
            X[k + 1] = step(X[k], U[k])
        self._cache_z, self._X = z.copy(), X
        return X

    def evaluate(self, z):
        X = self._states(z)
        U = z.reshape(self.N, self.m)
        c = self.model.stage_costs(X[:-1], U)
        ineq = [(X[1:] - self.xhi).ravel(), (self.xlo - X[1:]).ravel()]
        g = self.model.guard_values(X[:-1], U)
        if g is not None:
            ineq.append(self.model.guard_margin - g)
        return float(self.w @ c), np.concatenate(ineq), np.zeros(0)

    def gradient(self, z, w_in, w_eq=None):
        X = self._states(z)
        U = z.reshape(self.N, self.m)
        N, n = self.N, self.n
        model = self.model
        lx, lu = model.cost_gradients(X[:-1], U)
        gx = self.w[:, None] * lx
        gu = self.w[:, None] * lu
        box = N * n
        # state box multipliers act on x_1..x_N
        dX = np.zeros((N + 1, n))
        dX[1:] = (w_in[:box] - w_in[box:2 * box]).reshape(N, n)
        dX[:-1] += gx
        if model.domain_guard is not None:
            wg = w_in[2 * box:]
            if np.any(wg):
                hx, hu = model.guard_gradients(X[:-1], U)
                dX[:-1] -= wg[:, None] * hx
                gu = gu - wg[:, None] * hu
        fx, fu = model.jacobians(X[:-1], U)
        grad = np.empty((N, self.m))
        lam = dX[N]
        for k in range(N - 1, -1, -1):
            grad[k] = gu[k] + lam @ fu[k]
            lam = dX[k] + lam @ fx[k]
        return grad.ravel()


@functools.lru_cache(maxsize=64)
def cost_floor(model) -> float:
    """Cached ``ℓ_min`` of a model (see :func:`~ldempc.model.shift_cost_nonneg`)."""
    return shift_cost_nonneg(model)[1]


def cost_gradient(model: SmoothModel, x0, u, discount: DiscountProfile, N: Optional[int] = None):
    """Adjoint gradient of ``J_N^β`` with respect to the stacked inputs."""
    U = np.asarray(u, float).reshape(-1, model.m)
    N = len(U) if N is None else N
    prob = _ShootingProblem(model, x0, N, weights(discount, N))
    z = U.ravel()
    _, g, _ = prob.evaluate(z)
    return prob.gradient(z, np.zeros_like(g)).reshape(N, model.m)


def _initial_guesses(model: SmoothModel, N: int, opts: SolverOptions, warm_start):
    lo, hi = model.u_bounds
    starts = []
    if warm_start is not None:
        ws = list(warm_start) if isinstance(warm_start, (list, tuple)) and len(warm_start) and \
            np.ndim(warm_start[0]) == 2 else [warm_start]
        for w in ws:
            w = np.asarray(w, float).reshape(-1, model.m)
            if len(w) != N:
                raise ValueError(f"warm start has length {len(w)}, horizon is {N}")
            starts.append(w)
    else:
        starts.append(np.tile(np.clip(np.zeros(model.m), lo, hi), (N, 1)))
    rng = np.random.default_rng(opts.seed)
    for _ in range(opts.multistart):
        starts.append(rng.uniform(lo, hi, size=(N, model.m)))
    return starts


def solve_smooth(model: SmoothModel, x0, N: int, discount: DiscountProfile,
                 opts: Optional[SolverOptions] = None, warm_start=None,
                 multipliers=None, keep_history: bool = False) -> OcpSolution:
    """Single-shooting solve; returns the best feasible local solution over all starts.

    ``warm_start`` may be one ``(N, m)`` sequence or a list of them (each becomes a start).
    """
    opts = opts or SolverOptions()
    if not isinstance(model, SmoothModel):
        raise TypeError("solve_smooth needs a SmoothModel")
    if N < 1:
        raise ValueError("horizon must be >= 1")
    x0 = np.atleast_1d(np.asarray(x0, float))
    xlo, xhi = model.x_bounds
    if np.any(x0 < xlo - opts.tol_feas) or np.any(x0 > xhi + opts.tol_feas):
        raise ValueError(f"x0={x0} outside the state box")
    lmin = cost_floor(model)
    shifted = replace(model, cost_offset=model.cost_offset + lmin)
    w = weights(discount, N)
    prob = _ShootingProblem(shifted, x0, N, w, opts.backoff)
    exact = _ShootingProblem(shifted, x0, N, w)
    lo = np.tile(model.u_bounds[0], N)
    hi = np.tile(model.u_bounds[1], N)
    best = None
    for i, U0 in enumerate(_initial_guesses(model, N, opts, warm_start)):
        try:
            res = _optim.augmented_lagrangian(
                prob, U0.ravel(), lo, hi, tol_stat=opts.tol_stat, tol_feas=opts.tol_feas,
                max_iter=opts.max_iter, max_outer=opts.max_outer, rho0=opts.rho0,
                growth=opts.penalty_growth, memory=opts.memory, mu0=multipliers,
                keep_history=keep_history)
        except DomainError:
            continue
        _, g_true, _ = exact.evaluate(res.z)
        viol = max(0.0, float(np.max(g_true))) if g_true.size else 0.0
        feasible = viol <= opts.tol_feas
        key = (not feasible, viol if not feasible else 0.0, res.f)
        if best is None or key < best[0]:
            best = (key, i, res, viol)
    if best is None:
        U = _initial_guesses(model, N, opts, warm_start)[0]
        traj = rollout(model, x0, U)
        return OcpSolution(U, traj, np.nan, INFEASIBLE, np.inf, 0, np.nan, np.inf)
    _, i, res, viol = best
    U = res.z.reshape(N, model.m)
    traj = rollout(model, x0, U)
    value = float(w @ model.stage_costs(traj.states[:-1], U))
    if viol > opts.tol_feas:
        status = INFEASIBLE
    elif res.stat <= opts.tol_stat:
        status = OPTIMAL
    else:
        status = MAX_ITER
    return OcpSolution(U, traj, value, status, res.stat, res.iterations, res.f, viol,
                       res.mu, start_index=i, history=res.history)


def solve_ocp(model, x0, N: int, discount: DiscountProfile, opts: Optional[SolverOptions] = None,
              warm_start=None, multipliers=None) -> OcpSolution:
    if isinstance(model, GraphModel):
        return solve_dp_finite(model, x0, N, discount)
    return solve_smooth(model, x0, N, discount, opts, warm_start, multipliers)


def dpp_residual(model, x0, N: int, discount: DiscountProfile, opts: Optional[SolverOptions] = None,
                 sol: Optional[OcpSolution] = None) -> float:
    """``|V_N(x) - ℓ(x, u*(0)) - c V_{N-1}(f(x, u*(0)))|`` with ``c = Σβ_{N}[1:] / Σβ_{N-1}``.

    For the linear profile ``c = (N-1)/N``; for the constant profile ``c = 1``.
    The ``N-1`` problem is warm started from the tail of the ``N`` solution.
    """
    if N < 2:
        raise ValueError("DPP residual needs N >= 2")
    if discount.kind == "linear":
        c = (N - 1) / N
    elif discount.kind == "constant":
        c = 1.0
    else:
        raise ValueError("DPP scaling is defined for constant and linear profiles")
    sol = sol or solve_ocp(model, x0, N, discount, opts)
    x1 = sol.traj.states[1]
    if isinstance(model, GraphModel):
        u0 = sol.inputs[0]
        l0 = model.cost(x0, u0)
        V1 = solve_dp_finite(model, x1, N - 1, discount).value
    else:
        U = np.asarray(sol.inputs)
        l0 = float(model.stage_costs(np.atleast_2d(x0), U[:1])[0])
        tail = solve_smooth(model, x1, N - 1, discount, opts, warm_start=U[1:])
        V1 = tail.value
    return abs(sol.value - l0 - c * V1)
