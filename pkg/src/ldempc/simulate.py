"""Closed-loop simulation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .model import GraphModel, stage_cost
from .mpc import Controller, RecursiveFeasibilityError, ReusedPlan

__all__ = ["StepDiag", "ClosedLoopTrace", "run_closed_loop"]


@dataclass
class StepDiag:
    status: str
    iterations: int
    reused: bool = False
    plan: Any = None


@dataclass
class ClosedLoopTrace:
    states: list
    inputs: list
    stage_costs: list
    diags: list = field(default_factory=list)
    feasible: bool = True
    halted_at: Optional[int] = None
    controller: str = ""
    N: int = 0
    message: str = ""

    def __len__(self) -> int:
        return len(self.inputs)

    def state_array(self) -> np.ndarray:
        return np.array(self.states, dtype=float).reshape(len(self.states), -1)

    def input_array(self) -> np.ndarray:
        return np.array(self.inputs, dtype=float).reshape(len(self.inputs), -1)


def run_closed_loop(model, controller: Controller, x0, T_sim: int, keep_plans: bool = False) -> ClosedLoopTrace:
    """Apply ``controller`` for ``T_sim`` steps from ``x0``.

    An infeasible OCP halts the run: ``halted_at`` is set, ``feasible`` is
    false and the trace is truncated at that step.
    """
    if T_sim < 0:
        raise ValueError("T_sim must be >= 0")
    graph = isinstance(model, GraphModel)
    x = x0 if graph else np.asarray(x0, float)
    trace = ClosedLoopTrace([x], [], [], controller=controller.name, N=controller.N)
    for k in range(T_sim):
        try:
            u, diag = controller.control_step(x)
        except RecursiveFeasibilityError as exc:
            trace.feasible = False
            trace.halted_at = k
            trace.message = str(exc)
            break
        if isinstance(diag, ReusedPlan):
            d = StepDiag("reused", 0, True, diag.plan if keep_plans else None)
        else:
            d = StepDiag(diag.status, diag.iterations, False, diag if keep_plans else None)
        if not graph:
            u = np.array(u, dtype=float)
        trace.stage_costs.append(stage_cost(model, x, u))
        trace.inputs.append(u)
        trace.diags.append(d)
        x = model.step(x, u)
        trace.states.append(x)
    return trace
