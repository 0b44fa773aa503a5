"""Identity and property checks shared by the ``verify`` command and the test suite.

Every check returns a nonnegative residual; :func:`verify` collects them with
their thresholds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discount import CONSTANT, LINEAR, weight_sum, weights
from .model import GraphModel
from .metrics import rotated_cost
from .ocp import SolverOptions, dpp_residual, evaluate_cost, solve_dp_finite

__all__ = ["CheckResult", "brute_force_value", "check_rotated_identity", "check_dpp",
           "check_weight_sum", "check_dp_brute_force", "verify", "random_inputs", "random_storage"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    cases: int
    max_residual: float
    threshold: float

    @property
    def ok(self) -> bool:
        return bool(self.max_residual <= self.threshold)


def _paths(model: GraphModel, x, N):
    if N == 0:
        yield ()
        return
    for t in model.outgoing(x):
        for rest in _paths(model, t.next_state, N - 1):
            yield (t.input,) + rest


def brute_force_value(model: GraphModel, x0, N: int, discount) -> float:
    """Minimum cost over every admissible input sequence (exponential; small ``N`` only)."""
    best = math.inf
    for u in _paths(model, x0, N):
        best = min(best, evaluate_cost(model, x0, list(u), discount))
    return best


def random_inputs(model, x0, N, rng):
    """A random admissible input sequence (random walk on graphs, uniform box draw otherwise)."""
    if isinstance(model, GraphModel):
        u, x = [], x0
        for _ in range(N):
            t = model.outgoing(x)[rng.integers(len(model.outgoing(x)))]
            u.append(t.input)
            x = t.next_state
        return u
    lo, hi = model.u_bounds
    if model.domain_guard is None:
        return rng.uniform(lo, hi, size=(N, model.m))
    # sequential rejection sampling keeps every stage inside the cost domain
    U, x = np.empty((N, model.m)), np.asarray(x0, float)
    for k in range(N):
        for _ in range(200):
            u = rng.uniform(lo, hi)
            if model.guard_values(x[None], u[None])[0] >= model.guard_margin:
                break
        else:
            raise ValueError(f"no admissible input found at x={x}")
        U[k] = u
        x = model.step(x, u)
    return U


def random_storage(model, rng):
    """Random bounded storage function: a table on graphs, a quadratic on smooth models."""
    if isinstance(model, GraphModel):
        return {s: float(v) for s, v in zip(model.states, rng.uniform(-2, 2, len(model.states)))}
    a = rng.normal(size=model.n)
    P = rng.normal(size=(model.n, model.n))
    return lambda x: float(a @ x + x @ P @ x)


def check_rotated_identity(model, cases: int, seed: int = 0, N_max: int = 8, l_star: float = 0.0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        N = int(rng.integers(1, N_max + 1))
        if isinstance(model, GraphModel):
            x0 = model.states[rng.integers(len(model.states))]
        else:
            lo, hi = model.x_bounds
            x0 = rng.uniform(lo, hi)
        u = random_inputs(model, x0, N, rng)
        lam = random_storage(model, rng)
        discount = LINEAR if rng.random() < 0.75 else CONSTANT
        worst = max(worst, rotated_cost(model, lam, l_star, x0, u, discount, N)[2])
    return worst


def check_dpp(model, N_max: int = 10, opts=None, seed: int = 0, smooth_cases: int = 3):
    """Largest DPP residual; all states on graphs, random states on smooth models."""
    worst = 0.0
    if isinstance(model, GraphModel):
        for x in model.states:
            for N in range(2, N_max + 1):
                for d in (LINEAR, CONSTANT):
                    worst = max(worst, dpp_residual(model, x, N, d))
        return worst
    rng = np.random.default_rng(seed)
    lo, hi = model.x_bounds
    for _ in range(smooth_cases):
        mid = (lo + hi) / 2
        x = mid + 0.5 * (rng.uniform(lo, hi) - mid)  # keep away from the box edges
        N = int(rng.integers(2, N_max + 1))
        for d in (LINEAR, CONSTANT):
            worst = max(worst, dpp_residual(model, x, N, d, opts))
    return worst


def check_weight_sum(N_max: int = 10_000) -> float:
    """Closed form ``(N+1)/2`` against the integer sum of numerators and a compensated float sum."""
    worst = 0.0
    for N in range(1, N_max + 1):
        closed = weight_sum(LINEAR, N)
        if 2 * sum(range(1, N + 1)) != N * (N + 1) or closed != (N + 1) / 2:
            return math.inf
        worst = max(worst, abs(math.fsum(weights(LINEAR, N)) - closed) / closed)
    return worst


def check_dp_brute_force(model: GraphModel, N_max: int = 8) -> float:
    worst = 0.0
    for x in model.states:
        for N in range(1, N_max + 1):
            for d in (LINEAR, CONSTANT):
                sol = solve_dp_finite(model, x, N, d)
                bf = brute_force_value(model, x, N, d)
                worst = max(worst, abs(sol.value - bf))
                # the returned plan must attain the value it reports
                worst = max(worst, abs(evaluate_cost(model, x, list(sol.inputs), d) - sol.value))
    return worst


def verify(model, seed: int = 0, opts=None, quick: bool = False):
    """Run the identity suite on ``model``; returns a list of :class:`CheckResult`."""
    opts = opts or SolverOptions(seed=seed)
    graph = isinstance(model, GraphModel)
    out = []
    n_rot = 50 if graph else 20
    out.append(CheckResult("rotated_cost_identity", n_rot,
                           check_rotated_identity(model, n_rot, seed), 1e-9))
    if graph:
        out.append(CheckResult("dpp", len(model.states) * 9 * 2, check_dpp(model, 10), 1e-9))
        out.append(CheckResult("dp_vs_brute_force", len(model.states) * 8 * 2,
                               check_dp_brute_force(model, 8), 1e-12))
    else:
        cases = 1 if quick else 3
        out.append(CheckResult("dpp", 2 * cases, check_dpp(model, 8, opts, seed, cases), 1e-5))
    n_w = 1000 if quick else 10_000
    out.append(CheckResult("weight_sum_closed_form", n_w, check_weight_sum(n_w), 1e-15))
    return out
