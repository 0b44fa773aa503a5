"""Named example systems and construction from structured config.

Config keys (YAML or a plain dict)::

    variant: graph | oscillator | growth
    # graph
    states: [-1, 0, 1]
    transitions: [[-1, 0, 0, 1.0], ...]      # state, input, next_state, cost
    # oscillator
    omega0: 1.0471975511965976
    h: 1.0
    x_max: 1.0
    u_max: 0.1
    # growth
    x_bounds: [0.1, 10.0]
    u_bounds: [0.1, 10.0]
    guard_margin: 1.0e-6

Unknown keys are ignored here (the CLI reads its own keys from the same file).
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import yaml

from .model import GraphModel, SmoothModel

__all__ = ["graph", "oscillator", "growth", "oscillator_x01", "growth_steady_state",
           "GROWTH_X0", "PRESETS", "get_preset", "from_config", "load_config"]

# Declaration order is also the DP tie-break order. Going to the orbit is
# listed before waiting so that the N=1 tie resolves towards the orbit.
GRAPH_TRANSITIONS = (
    (-1, 0, 0, 1.0),
    (-1, -1, -1, 1.0),
    (0, 1, 1, 0.0),
    (1, 0, 0, 1.5),
)


def graph(transitions=GRAPH_TRANSITIONS, states=(-1, 0, 1)) -> GraphModel:
    """Three-state system ``x+ = u`` whose optimal behaviour is the 2-cycle 0 <-> 1."""
    return GraphModel(tuple(states), tuple(transitions), name="graph")


def oscillator_matrices(omega0: float = 2 * math.pi / 6, h: float = 1.0):
    c, s = math.cos(h * omega0), math.sin(h * omega0)
    A = np.array([[c, -s], [s, c]])
    B = np.array([[s, c - 1.0], [1.0 - c, s]]) / omega0
    return A, B


def oscillator(omega0: float = 2 * math.pi / 6, h: float = 1.0, x_max: float = 1.0,
               u_max: float = 0.1) -> SmoothModel:
    """Exactly discretized harmonic oscillator with stage cost ``x_1**3``."""
    A, B = oscillator_matrices(omega0, h)
    A.setflags(write=False)
    B.setflags(write=False)

    def dynamics(x, u):
        return x @ A.T + u @ B.T

    def jac(x, u):
        return A, B

    def cost(x, u):
        return x[..., 0] ** 3

    def cost_grad(x, u):
        gx = np.zeros(np.shape(x))
        gx[..., 0] = 3.0 * x[..., 0] ** 2
        return gx, np.zeros(np.shape(u))

    Binv = np.linalg.inv(B)

    def orbit_init(p, rng):
        # p equally spaced points on a free-response circle of random feasible radius
        r = rng.uniform(0.05, 1.0) * x_max
        theta = rng.uniform(0, 2 * np.pi) + 2 * np.pi * np.arange(p) / p
        X = r * np.column_stack([np.cos(theta), np.sin(theta)])
        U = (np.roll(X, -1, axis=0) - X @ A.T) @ Binv.T
        return X, np.clip(U, -u_max, u_max)

    return SmoothModel(
        n=2, m=2, dynamics=dynamics, stage_cost=cost,
        x_bounds=(-x_max, x_max), u_bounds=(-u_max, u_max),
        dynamics_jac=jac, cost_grad=cost_grad, vectorized=True, name="oscillator",
        meta={"A": A, "B": B, "omega0": omega0, "h": h, "x_max": x_max, "u_max": u_max,
              "orbit_init": orbit_init},
    )


def oscillator_x01(model: SmoothModel) -> np.ndarray:
    """``(u_max / omega0) * (-1, -1)``: the problematic initial state."""
    return model.meta["u_max"] / model.meta["omega0"] * np.array([-1.0, -1.0])


# default initial state for growth experiments (below the steady state)
GROWTH_X0 = 1.0


def growth(x_bounds=(0.1, 10.0), u_bounds=(0.1, 10.0), guard_margin: float = 1e-6,
           A: float = 5.0, alpha: float = 0.34) -> SmoothModel:
    """Brock-Mirman type growth model ``x+ = u`` with ``ℓ = -log(A x^alpha - u)``."""

    def dynamics(x, u):
        return np.array(u, dtype=float, copy=True)

    def jac(x, u):
        return np.zeros((1, 1)), np.ones((1, 1))

    def guard(x, u):
        return A * np.power(x[..., 0], alpha) - u[..., 0]

    def guard_grad(x, u):
        return (A * alpha * np.power(x, alpha - 1.0), -np.ones(np.shape(u)))

    def cost(x, u):
        return -np.log(A * np.power(x[..., 0], alpha) - u[..., 0])

    def cost_grad(x, u):
        g = guard(x, u)[..., None]
        gx, gu = guard_grad(x, u)
        return -gx / g, -gu / g

    return SmoothModel(
        n=1, m=1, dynamics=dynamics, stage_cost=cost,
        x_bounds=x_bounds, u_bounds=u_bounds, domain_guard=guard, guard_margin=guard_margin,
        dynamics_jac=jac, cost_grad=cost_grad, guard_grad=guard_grad, vectorized=True,
        name="growth", meta={"A": A, "alpha": alpha},
    )


def growth_steady_state(A: float = 5.0, alpha: float = 0.34) -> float:
    """Best steady state of the growth model by scalar maximization of ``log(A x^alpha - x)``."""
    from scipy.optimize import minimize_scalar

    # A x^alpha - x > 0 on (0, A^(1/(1-alpha)))
    top = A ** (1.0 / (1.0 - alpha))
    res = minimize_scalar(lambda x: -math.log(A * x ** alpha - x), bounds=(1e-9, top * (1 - 1e-12)),
                          method="bounded", options={"xatol": 1e-12})
    return float(res.x)


PRESETS = {"graph": graph, "oscillator": oscillator, "growth": growth}


def get_preset(name: str):
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def from_config(cfg: dict):
    variant = str(cfg.get("variant", cfg.get("preset", ""))).lower()
    if variant == "graph":
        if "transitions" not in cfg:
            return graph()
        trans = [tuple(t) for t in cfg["transitions"]]
        for i, t in enumerate(trans):
            if len(t) != 4:
                raise ValueError(f"transitions[{i}]: expected [state, input, next_state, cost], got {t}")
        states = cfg.get("states")
        if states is None:
            states = list(dict.fromkeys([t[0] for t in trans] + [t[2] for t in trans]))
        return graph(transitions=trans, states=states)
    if variant == "oscillator":
        kw = {k: float(cfg[k]) for k in ("omega0", "h", "x_max", "u_max") if k in cfg}
        return oscillator(**kw)
    if variant == "growth":
        kw = {}
        for k in ("x_bounds", "u_bounds"):
            if k in cfg:
                kw[k] = tuple(float(v) for v in cfg[k])
        if "guard_margin" in cfg:
            kw["guard_margin"] = float(cfg["guard_margin"])
        return growth(**kw)
    raise ValueError(f"config key 'variant': unknown value {variant!r}")


def load_config(path) -> dict:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1})" if mark is not None else ""
        raise ValueError(f"{path}: cannot parse config{where}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: top level must be a mapping of keys")
    return data
