"""Receding-horizon controllers without terminal conditions.

* ``discounted``   -- 1-step MPC on the linearly discounted cost
* ``undiscounted`` -- 1-step MPC on the plain finite-horizon cost
* ``pstep:<p>``    -- applies the first ``p`` inputs of each undiscounted plan
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .discount import CONSTANT, LINEAR
from .model import GraphModel, check_feasible, rollout
from .ocp import INFEASIBLE, OcpSolution, SolverOptions, solve_dp_finite, solve_smooth
from .orbit import PeriodicOrbit, orbit_points

__all__ = ["Controller", "RecursiveFeasibilityError", "ReusedPlan", "make_controller",
           "warm_start_plan", "parse_controller"]

log = logging.getLogger(__name__)


class RecursiveFeasibilityError(RuntimeError):
    """The OCP became infeasible along the closed loop."""


@dataclass(frozen=True)
class ReusedPlan:
    """Diagnostic returned when a p-step controller applies a stored input."""

    phase: int
    plan: OcpSolution = field(repr=False, compare=False)


def warm_start_plan(prev: OcpSolution, orbit_hint: Optional[PeriodicOrbit] = None, model=None):
    """Shift ``prev.inputs`` by one stage and append one input.

    The appended input is the orbit input at the orbit state closest to the
    predicted terminal state when ``orbit_hint`` is given, otherwise a copy of
    the last input. Feasibility is not checked.
    """
    inputs = prev.inputs
    if orbit_hint is not None:
        X, _ = orbit_points(orbit_hint, model)
        xN = prev.traj.states[-1]
        xv = model.embed_state(xN) if isinstance(model, GraphModel) else np.asarray(xN, float)
        k = int(np.argmin(np.sum((X - xv) ** 2, axis=1)))
        extra = orbit_hint.inputs[k]
    else:
        extra = inputs[-1]
    if isinstance(inputs, np.ndarray):
        return np.vstack([inputs[1:], np.asarray(extra, float).reshape(1, -1)])
    return list(inputs[1:]) + [extra]


def parse_controller(spec: str):
    """``"discounted" | "undiscounted" | "pstep:<p>"`` -> ``(kind, p)``."""
    spec = spec.strip().lower()
    if spec in ("discounted", "undiscounted"):
        return spec, 1
    if spec.startswith("pstep"):
        _, _, p = spec.partition(":")
        try:
            p = int(p)
        except ValueError:
            raise ValueError(f"bad controller {spec!r}; expected pstep:<p>") from None
        if p < 1:
            raise ValueError("pstep period must be >= 1")
        return "pstep", p
    raise ValueError(f"unknown controller {spec!r}")


class Controller:
    """Stateful receding-horizon feedback; drive one instance from one thread.

    Smooth solves are warm started from the previous plan (shifted, and as is)
    and the first solve uses ``first_multistart`` extra random starts.
    """

    def __init__(self, model, kind: str, N: int, p: int = 1, opts: Optional[SolverOptions] = None,
                 warm_start: bool = True, first_multistart: int = 16,
                 orbit_hint: Optional[PeriodicOrbit] = None):
        if kind not in ("discounted", "undiscounted", "pstep"):
            raise ValueError(f"unknown controller kind {kind!r}")
        if N < 1:
            raise ValueError("horizon must be >= 1")
        if kind != "pstep":
            p = 1
        if N < p:
            raise ValueError(f"horizon {N} shorter than the applied block p={p}")
        self.model, self.kind, self.N, self.p = model, kind, N, p
        self.opts = opts or SolverOptions()
        self.warm_start = warm_start
        self.first_multistart = first_multistart
        self.orbit_hint = orbit_hint
        self.discount = LINEAR if kind == "discounted" else CONSTANT
        self.reset()

    @property
    def name(self) -> str:
        return f"pstep:{self.p}" if self.kind == "pstep" else self.kind

    def reset(self):
        self.plan: Optional[OcpSolution] = None
        self.phase = 0
        self._since_solve = 0
        self.events: list = []

    def _check_state(self, x):
        if isinstance(self.model, GraphModel):
            if x not in self.model.states:
                raise ValueError(f"unknown state {x!r}")
            return
        lo, hi = self.model.x_bounds
        x = np.asarray(x, float)
        tol = self.opts.tol_feas * 10
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            raise ValueError(f"state {x} outside the state box")

    def _warm_candidates(self):
        if not self.warm_start or self.plan is None or isinstance(self.model, GraphModel):
            return None
        shifted = self.plan
        cands = []
        for _ in range(self._since_solve):
            U = warm_start_plan(shifted, self.orbit_hint, self.model)
            shifted = OcpSolution(U, rollout(self.model, shifted.traj.states[1], U), np.nan, "")
        cands.append(np.asarray(shifted.inputs))
        cands.append(np.asarray(self.plan.inputs))
        return cands

    def solve(self, x) -> OcpSolution:
        if isinstance(self.model, GraphModel):
            sol = solve_dp_finite(self.model, x, self.N, self.discount)
        else:
            warm = self._warm_candidates()
            opts = self.opts
            if warm is None:
                opts = _with_multistart(opts, opts.multistart + self.first_multistart)
            sol = solve_smooth(self.model, x, self.N, self.discount, opts, warm_start=warm)
        if sol.status == INFEASIBLE:
            raise RecursiveFeasibilityError(
                f"{self.name} N={self.N}: OCP infeasible at x={x} (violation {sol.violation:.2e})")
        self.plan = sol
        self._since_solve = 0
        return sol

    def _stored_plan_valid(self, x) -> bool:
        planned = self.plan.traj.states[self.phase]
        if isinstance(self.model, GraphModel):
            return planned == x
        if not np.allclose(planned, x, rtol=0, atol=1e-9):
            return False
        rest = rollout(self.model, x, np.asarray(self.plan.inputs)[self.phase:])
        return check_feasible(self.model, rest, self.opts.tol_feas * 10).ok

    def control_step(self, x):
        """Return ``(u, diag)`` where ``diag`` is the fresh ``OcpSolution`` or a :class:`ReusedPlan`."""
        self._check_state(x)
        if self.kind == "pstep" and self.phase > 0 and self.plan is not None:
            if self._stored_plan_valid(x):
                u = self.plan.inputs[self.phase]
                diag = ReusedPlan(self.phase, self.plan)
                self.phase = (self.phase + 1) % self.p
                self._since_solve += 1
                return u, diag
            self.events.append(("resolve", self.phase))
            log.info("%s: stored plan invalid at phase %d, re-solving", self.name, self.phase)
        if self.plan is not None:
            self._since_solve += 1
        sol = self.solve(x)
        self.phase = 1 % self.p
        return sol.inputs[0], sol


def _with_multistart(opts: SolverOptions, k: int) -> SolverOptions:
    from dataclasses import replace
    return replace(opts, multistart=k)


def make_controller(model, spec: str, N: int, **kw) -> Controller:
    kind, p = parse_controller(spec)
    return Controller(model, kind, N, p, **kw)
