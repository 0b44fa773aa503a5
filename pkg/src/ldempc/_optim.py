"""Box-constrained minimization and an augmented-Lagrangian outer loop.

The inner solver is projected gradient with Armijo backtracking along the
projection arc. Directions on the free variables are scaled by an L-BFGS
two-loop recursion (``memory=0`` gives plain projected gradient). Objective
evaluations that raise :class:`~ldempc.model.DomainError` count as ``+inf``
and are backtracked out of, so iterates never leave the cost domain.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .model import DomainError

ARMIJO_C = 1e-4

log = logging.getLogger(__name__)


@dataclass
class BoxResult:
    z: np.ndarray
    f: float
    grad: np.ndarray
    stat: float
    iterations: int
    history: list = field(default_factory=list)


def projected_stationarity(z, g, lo, hi) -> float:
    if z.size == 0:
        return 0.0
    return float(np.max(np.abs(np.clip(z - g, lo, hi) - z)))


def _two_loop(q, S, Y):
    # pairs restricted to the free set may lose positive curvature
    keep = [(s, y) for s, y in zip(S, Y) if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y)]
    S, Y = [s for s, _ in keep], [y for _, y in keep]
    alpha = []
    for s, y in zip(reversed(S), reversed(Y)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q = q - a * y
        alpha.append((rho, a))
    if S:
        s, y = S[-1], Y[-1]
        q = q * ((s @ y) / (y @ y))
    for (s, y), (rho, a) in zip(zip(S, Y), reversed(alpha)):
        b = rho * (y @ q)
        q = q + (a - b) * s
    return q


def _armijo(fg, z, f, g, d, alpha, lo, hi, max_halvings):
    """Backtrack ``alpha`` (halving) until the Armijo condition holds on the projection arc.

    When the predicted decrease is below the rounding level of ``f`` the
    function test cannot discriminate; a step is then accepted if ``f`` did
    not rise beyond rounding and the slope at the new point still points along
    the step (the step did not overshoot).
    """
    noise = 8 * np.finfo(float).eps * max(abs(f), 1.0)
    for _ in range(max_halvings):
        zt = np.clip(z + alpha * d, lo, hi)
        step = zt - z
        if not np.any(step):
            return None
        try:
            ft, gt = fg(zt)
        except DomainError:
            ft, gt = np.inf, None
        if np.isfinite(ft):
            slope = g @ step
            if ft <= f + ARMIJO_C * slope:
                return zt, ft, gt
            if -slope < noise and ft <= f + noise and gt @ step <= 0:
                return zt, ft, gt
        alpha *= 0.5
    return None


def minimize_box(fg, z0, lo, hi, tol=1e-8, max_iter=500, memory=10, keep_history=False,
                 max_halvings=40) -> BoxResult:
    """Minimize ``fg(z) -> (f, grad)`` over ``lo <= z <= hi``.

    Accepted iterates have nonincreasing ``f`` (up to rounding). Stops on
    projected-gradient inf-norm ``<= tol``, ``max_iter``, or when the line
    search can make no further progress.
    """
    z = np.clip(np.asarray(z0, float), lo, hi)
    f, g = fg(z)
    if not np.isfinite(f):
        raise DomainError("initial point outside the cost domain")
    S: deque = deque(maxlen=max(memory, 1))
    Y: deque = deque(maxlen=max(memory, 1))
    history = [f] if keep_history else []
    span = np.where(np.isfinite(hi - lo), hi - lo, 1.0)
    eps_act = 1e-12 * (1.0 + span)
    it = 0
    stat = projected_stationarity(z, g, lo, hi)

    def gradient_step_length(mask):
        gmax = np.max(np.abs(g[mask])) if np.any(mask) else np.max(np.abs(g))
        return min(1.0, 0.1 * float(np.min(span)) / max(gmax, 1e-300))

    while it < max_iter and stat > tol:
        it += 1
        act = ((z <= lo + eps_act) & (g > 0)) | ((z >= hi - eps_act) & (g < 0))
        free = ~act
        step = None
        if memory > 0 and S:
            d = -g.copy()
            d[free] = -_two_loop(g[free], [s[free] for s in S], [y[free] for y in Y])
            if g[free] @ d[free] < 0:
                step = _armijo(fg, z, f, g, d, 1.0, lo, hi, max_halvings)
        if step is None:
            # plain projected gradient; forget curvature pairs
            S.clear()
            Y.clear()
            step = _armijo(fg, z, f, g, -g, gradient_step_length(free), lo, hi, max_halvings)
        if step is None:
            break
        zt, ft, gt = step
        s, y = zt - z, gt - g
        if memory > 0 and s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
        z, f, g = zt, ft, gt
        if keep_history:
            history.append(f)
        stat = projected_stationarity(z, g, lo, hi)
    return BoxResult(z, f, g, stat, it, history)


@dataclass
class ALResult:
    z: np.ndarray
    f: float
    violation: float
    stat: float
    iterations: int
    mu: np.ndarray
    nu: np.ndarray
    history: list


def augmented_lagrangian(problem, z0, lo, hi, *, tol_stat=1e-8, tol_feas=1e-8, max_iter=500,
                         max_outer=8, rho0=10.0, growth=10.0, memory=10, mu0=None, nu0=None,
                         keep_history=False) -> ALResult:
    """Minimize ``problem`` subject to ``g(z) <= 0``, ``h(z) = 0`` and the box.

    ``problem`` provides ``evaluate(z) -> (f, g, h)`` and
    ``gradient(z, w_ineq, w_eq) -> ∇f + Jg^T w_ineq + Jh^T w_eq``.
    """
    z = np.clip(np.asarray(z0, float), lo, hi)
    _, g0, h0 = problem.evaluate(z)
    mu = np.zeros(len(g0)) if mu0 is None or len(mu0) != len(g0) else np.maximum(np.asarray(mu0, float), 0)
    nu = np.zeros(len(h0)) if nu0 is None or len(nu0) != len(h0) else np.asarray(nu0, float).copy()
    rho = rho0
    total = 0
    history: list = []

    def violation(g, h):
        v = 0.0
        if g.size:
            v = max(v, float(np.max(g)))
        if h.size:
            v = max(v, float(np.max(np.abs(h))))
        return v

    viol = violation(g0, h0)
    f = np.nan
    stat = np.inf
    for outer in range(max_outer):
        # loose inner tolerance in early rounds, full accuracy once nearly feasible
        inner_tol = tol_stat if outer == max_outer - 1 or viol <= tol_feas else \
            max(tol_stat, min(1e-4, viol) * 1e-2)

        def merit(zz, mu=mu, nu=nu, rho=rho):
            ff, gg, hh = problem.evaluate(zz)
            wi = np.maximum(0.0, mu + rho * gg)
            we = nu + rho * hh
            val = ff + (wi @ wi - mu @ mu) / (2 * rho) + nu @ hh + 0.5 * rho * (hh @ hh)
            return val, problem.gradient(zz, wi, we)

        res = minimize_box(merit, z, lo, hi, tol=inner_tol, max_iter=max_iter, memory=memory,
                           keep_history=keep_history)
        total += res.iterations
        if keep_history:
            history.append(res.history)
        z = res.z
        f, g, h = problem.evaluate(z)
        new_viol = violation(g, h)
        mu = np.maximum(0.0, mu + rho * g)
        nu = nu + rho * h
        stat = projected_stationarity(z, problem.gradient(z, mu, nu), lo, hi)
        log.debug("AL round %d: rho=%.0e inner_it=%d inner_stat=%.2e viol=%.2e stat=%.2e",
                  outer, rho, res.iterations, res.stat, new_viol, stat)
        if new_viol <= tol_feas and stat <= tol_stat:
            viol = new_viol
            break
        # grow the penalty on slow progress, or when the current rate cannot
        # reach tol_feas in the rounds that remain
        left = max_outer - outer - 1
        ratio = new_viol / viol if viol > 0 else 1.0
        if new_viol > tol_feas and (ratio > 0.25 or new_viol * ratio ** left > tol_feas):
            rho *= growth
        viol = new_viol
    return ALResult(z, f, viol, stat, total, mu, nu, history)
