"""Closed-loop performance measures and exact identities of the discounted cost."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .discount import DiscountProfile, weights
from .model import GraphModel, rollout
from .ocp import OcpSolution, solve_ocp
from .orbit import PeriodicOrbit, distance

__all__ = ["MetricsReport", "DEFAULT_EPSILONS", "accumulated_cost", "aap_estimate",
           "transient_performance", "turnpike_count", "rotated_cost", "feasibility_margin",
           "storage", "report"]

DEFAULT_EPSILONS = (0.01, 0.05, 0.1)


def accumulated_cost(trace, T: int) -> float:
    """Undiscounted sum of the first ``T`` closed-loop stage costs."""
    if not 0 <= T <= len(trace.stage_costs):
        raise ValueError(f"T={T} outside [0, {len(trace.stage_costs)}]")
    return float(sum(trace.stage_costs[:T]))


def aap_estimate(trace, p: int) -> float:
    """Average of the last ``p`` stage costs (estimate of the asymptotic average cost)."""
    if not trace.feasible:
        raise ValueError(f"trace halted at step {trace.halted_at}")
    if p < 1 or len(trace.stage_costs) < p:
        raise ValueError(f"need at least p={p} stage costs, have {len(trace.stage_costs)}")
    return float(np.mean(trace.stage_costs[-p:]))


def transient_performance(trace, T_lo: int, T_hi: int, l_star: float) -> float:
    """Mean of ``J_T - T ℓ*`` over ``T`` in ``[T_lo, T_hi]``."""
    if not 0 <= T_lo <= T_hi:
        raise ValueError(f"invalid window [{T_lo}, {T_hi}]")
    if len(trace.stage_costs) < T_hi:
        raise ValueError(f"trace has {len(trace.stage_costs)} steps, window needs {T_hi}")
    c = np.concatenate([[0.0], np.cumsum(trace.stage_costs)])
    Ts = np.arange(T_lo, T_hi + 1)
    return float(np.mean(c[Ts] - Ts * l_star))


def turnpike_count(plan: OcpSolution, orbit: PeriodicOrbit, eps: float, model=None) -> int:
    """Number of plan stages ``k < N`` with ``||(x_k, u_k)||_Π <= eps``."""
    model = model if model is not None else orbit.model
    states = plan.traj.states
    return sum(1 for k, u in enumerate(plan.inputs) if distance(states[k], u, orbit, model) <= eps)


def storage(table_or_fn) -> Callable:
    """Wrap a dict ``{state: value}`` or a callable as a storage function ``λ``."""
    if callable(table_or_fn):
        return table_or_fn
    table = dict(table_or_fn)
    return lambda x: float(table[x])


def _stage_costs(model, traj):
    if isinstance(model, GraphModel):
        return np.array([model.cost(s, a) for s, a in zip(traj.states, traj.inputs)])
    return model.stage_costs(traj.states[:-1], traj.inputs)


def rotated_cost(model, lam, l_star: float, x0, u, discount: DiscountProfile, N: Optional[int] = None):
    """``(direct, via_identity, residual)`` for the discounted rotated cost.

    ``direct`` sums ``β_N(k) (ℓ - ℓ* + λ(x_k) - λ(x_{k+1}))``. ``via_identity``
    rearranges the same sum by parts; for the linear profile this is
    ``J - (N+1)/2 ℓ* + λ(x_0) - (1/N) Σ_{k=1}^{N} λ(x_k)``.
    """
    lam = storage(lam)
    N = len(u) if N is None else N
    traj = rollout(model, x0, u[:N] if isinstance(model, GraphModel) else np.asarray(u)[:N])
    lv = np.array([lam(x) for x in traj.states], dtype=float)
    c = _stage_costs(model, traj)
    w = weights(discount, N)
    direct = float(np.sum(w * (c - l_star + lv[:-1] - lv[1:])))
    J = float(w @ c)
    if discount.kind == "linear":
        ident = J - (N + 1) / 2 * l_star + lv[0] - np.sum(lv[1:]) / N
    else:
        dw = np.diff(w)  # β(k) - β(k-1), k = 1..N-1
        ident = (J - np.sum(w) * l_star + w[0] * lv[0] - w[-1] * lv[N]
                 + float(lv[1:N] @ dw))
    return direct, float(ident), abs(direct - float(ident))


def feasibility_margin(model, lam, lam_bar: float, l_star: float, p_star: int, l_max: float, x,
                       N: int, M: int, discount: Optional[DiscountProfile] = None,
                       value: Optional[float] = None, opts=None) -> float:
    """``V_N(x) - (N+1)/2 ℓ* + λ(x) + λ̄ - C(M)`` with ``C(M) = M(ℓ_max - ℓ*) + 2λ̄ + ℓ* p*``.

    Nonpositive values are consistent with ``x`` lying in the level set used
    for recursive feasibility. Costs are expected nonnegative (shifted).
    """
    from .discount import LINEAR
    lam = storage(lam)
    if value is None:
        sol = solve_ocp(model, x, N, discount or LINEAR, opts)
        value = sol.value
    C = M * (l_max - l_star) + 2 * lam_bar + l_star * p_star
    return float(value - (N + 1) / 2 * l_star + lam(x) + lam_bar - C)


@dataclass
class MetricsReport:
    J_T: dict
    aap_gap: float
    j_tr: float
    turnpike_counts: dict = field(default_factory=dict)
    identity_residuals: dict = field(default_factory=dict)


def report(trace, l_star: float, p_star: int, T_window=(25, 30), orbit: Optional[PeriodicOrbit] = None,
           epsilons=DEFAULT_EPSILONS, model=None) -> MetricsReport:
    """Collect the standard measures of a closed-loop trace.

    Turnpike counts need ``orbit`` and a trace simulated with ``keep_plans``.
    """
    J = {T: accumulated_cost(trace, T) for T in range(len(trace.stage_costs) + 1)}
    gap = aap_estimate(trace, p_star) - l_star if trace.feasible else np.nan
    lo, hi = T_window
    jtr = transient_performance(trace, lo, hi, l_star) if len(trace.stage_costs) >= hi else np.nan
    counts = {}
    if orbit is not None:
        for eps in epsilons:
            counts[eps] = [turnpike_count(d.plan, orbit, eps, model) for d in trace.diags
                           if d.plan is not None and not d.reused]
    return MetricsReport(J, gap, jtr, counts)
