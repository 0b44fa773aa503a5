"""Command-line experiment runner.

Commands: ``orbit-scan``, ``open-loop``, ``closed-loop``, ``compare``, ``verify``.
Every flag can also be given as a key of a YAML file passed with ``--config``
(``--keep-plans`` is ``keep_plans`` there); flags given on the command line win.
CSV output has a one-line header and 17 significant digits.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import presets
from .checks import verify as run_checks
from .discount import parse_discount, weights
from .metrics import aap_estimate, transient_performance
from .model import GraphModel, stage_cost
from .mpc import make_controller, parse_controller
from .ocp import SolverOptions, solve_ocp
from .orbit import scan_periods
from .simulate import run_closed_loop

log = logging.getLogger("ldempc")

DEFAULTS = {
    "preset": "graph", "seed": 0, "tsim": 60, "pmax": 12, "horizon": 10, "horizons": "1..20",
    "controller": "discounted", "controllers": "discounted,undiscounted", "discount": "linear",
    "window": "25,30", "keep_plans": False, "out": None, "x0": None, "l_star": None, "p_star": None,
    "quick": False, "starts": 20,
}


def parse_horizons(text) -> list:
    """``"1..20"``, ``"14..20,27"``, ``"5,10,20"`` or a list of ints -> sorted unique horizons."""
    if isinstance(text, int):
        items = [text]
    elif isinstance(text, (list, tuple)):
        items = [int(v) for v in text]
    else:
        items = []
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                a, b = part.split("..", 1)
                a, b = int(a), int(b)
                if b < a:
                    raise ValueError(f"empty horizon range {part!r}")
                items.extend(range(a, b + 1))
            else:
                items.append(int(part))
    if not items or min(items) < 1:
        raise ValueError(f"horizons must be integers >= 1, got {text!r}")
    return sorted(set(items))


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    if v is None:
        return ""
    return str(v)


def write_csv(rows, header, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    if out in (None, "-"):
        sys.stdout.write(buf.getvalue())
    else:
        Path(out).write_text(buf.getvalue())


def _vec(v):
    return list(np.atleast_1d(np.asarray(v, dtype=float)))


def _x_cols(model, prefix):
    if isinstance(model, GraphModel):
        return [prefix]
    dim = model.n if prefix == "x" else model.m
    return [f"{prefix}{i}" for i in range(dim)]


def _cells(model, v, prefix):
    if isinstance(model, GraphModel):
        return [v]
    if v is None:
        return [None] * len(_x_cols(model, prefix))
    return _vec(v)


def _settings(args) -> dict:
    cfg = presets.load_config(args.config) if args.config else {}
    s = dict(DEFAULTS)
    s.update({k.replace("-", "_"): v for k, v in cfg.items()})
    s["model_cfg"] = cfg
    for k, v in vars(args).items():
        if v is not None and k not in ("command", "config", "verbose"):
            s[k] = v
    if args.preset is None and "variant" in cfg:
        s["preset"] = None
    return s


def build_model(s):
    if s.get("preset") is None:
        return presets.from_config(s["model_cfg"])
    return presets.get_preset(s["preset"])


def default_x0(model, s):
    if s.get("x0") is not None:
        x0 = s["x0"]
        if isinstance(model, GraphModel):
            x0 = type(model.states[0])(x0) if not isinstance(x0, type(model.states[0])) else x0
            return x0
        vals = [float(t) for t in str(x0).split(",")] if isinstance(x0, str) else list(np.atleast_1d(x0))
        return np.array(vals, dtype=float)
    if isinstance(model, GraphModel):
        return -1 if -1 in model.states else model.states[0]
    if model.name == "oscillator":
        return presets.oscillator_x01(model)
    if model.name == "growth":
        return np.array([presets.GROWTH_X0])
    lo, hi = model.x_bounds
    return (lo + hi) / 2


def _opts(s) -> SolverOptions:
    return SolverOptions.from_config({**s, "seed": s["seed"]})


def cmd_orbit_scan(model, s):
    res = scan_periods(model, int(s["pmax"]), _opts(s), starts=int(s["starts"]))
    rows = [(o.p, o.avg_cost, o.minimal, o.status) for o in res.orbits]
    write_csv(rows, ["p", "avg_cost", "minimal", "status"], s["out"])
    log.info("p* = %s, l* = %.12g", res.p_star, res.l_star)
    return 0


def cmd_open_loop(model, s):
    N = int(s["horizon"])
    d = parse_discount(s["discount"])
    x0 = default_x0(model, s)
    sol = solve_ocp(model, x0, N, d, _opts(s))
    w = weights(d, N)
    rows = []
    for k in range(N):
        x, u = sol.traj.states[k], sol.inputs[k]
        rows.append([k, *_cells(model, x, "x"), *_cells(model, u, "u"), stage_cost(model, x, u), w[k]])
    rows.append([N, *_cells(model, sol.traj.states[N], "x"), *_cells(model, None, "u"), None, None])
    write_csv(rows, ["k", *_x_cols(model, "x"), *_x_cols(model, "u"), "stage_cost", "weight"], s["out"])
    log.info("value %.17g status %s", sol.value, sol.status)
    return 0


def cmd_closed_loop(model, s):
    ctrl = make_controller(model, s["controller"], int(s["horizon"]), opts=_opts(s))
    x0 = default_x0(model, s)
    keep = bool(s["keep_plans"])
    if keep and s["out"] in (None, "-"):
        raise ValueError("--keep-plans needs --out (plans go to <out>.plans.csv)")
    tr = run_closed_loop(model, ctrl, x0, int(s["tsim"]), keep_plans=keep)
    rows = []
    for k, (u, c, d) in enumerate(zip(tr.inputs, tr.stage_costs, tr.diags)):
        rows.append([k, *_cells(model, tr.states[k], "x"), *_cells(model, u, "u"), c, d.status, d.iterations])
    K = len(tr.inputs)
    rows.append([K, *_cells(model, tr.states[K], "x"), *_cells(model, None, "u"), None,
                 "halted" if not tr.feasible else None, None])
    write_csv(rows, ["k", *_x_cols(model, "x"), *_x_cols(model, "u"), "stage_cost", "solver_status",
                     "solve_iters"], s["out"])
    if keep:
        prow = []
        for step, d in enumerate(tr.diags):
            if d.reused:
                continue
            plan = d.plan
            for j in range(plan.N):
                prow.append([step, j, *_cells(model, plan.traj.states[j], "x"),
                             *_cells(model, plan.inputs[j], "u")])
        out = Path(s["out"])
        write_csv(prow, ["step", "j", *_x_cols(model, "x"), *_x_cols(model, "u")],
                  out.with_name(out.stem + ".plans.csv"))
    if not tr.feasible:
        log.warning("closed loop halted at step %d: %s", tr.halted_at, tr.message)
    return 0


def _reference(model, s):
    if s.get("l_star") is not None and s.get("p_star") is not None:
        return float(s["l_star"]), int(s["p_star"])
    res = scan_periods(model, int(s["pmax"]), _opts(s), starts=int(s["starts"]))
    log.info("reference orbit: p* = %s, l* = %.12g", res.p_star, res.l_star)
    return res.l_star, res.p_star


def compare_cell(model, spec, N, x0, s, l_star, p_star):
    """One ``(N, controller)`` row; failures are recorded, not raised."""
    lo, hi = (int(t) for t in str(s["window"]).split(","))
    try:
        ctrl = make_controller(model, spec, N, opts=_opts(s))
        tr = run_closed_loop(model, ctrl, x0, int(s["tsim"]))
    except Exception as exc:  # noqa: BLE001 - a failing cell must not end the sweep
        log.warning("N=%d %s failed: %s", N, spec, exc)
        return [N, spec, math.nan, math.nan, False]
    gap = aap_estimate(tr, p_star) - l_star if tr.feasible else math.nan
    jtr = transient_performance(tr, lo, hi, l_star) if len(tr.stage_costs) >= hi else math.nan
    return [N, spec, gap, jtr, tr.feasible]


def cmd_compare(model, s):
    horizons = parse_horizons(s["horizons"])
    specs = [c.strip() for c in str(s["controllers"]).split(",") if c.strip()]
    for c in specs:
        parse_controller(c)
    l_star, p_star = _reference(model, s)
    x0 = default_x0(model, s)
    rows = [compare_cell(model, c, N, x0, s, l_star, p_star) for N in horizons for c in specs]
    rows.sort(key=lambda r: (r[0], specs.index(r[1])))
    write_csv(rows, ["N", "controller", "aap_gap", "j_tr", "feasible"], s["out"])
    return 0


def cmd_verify(model, s):
    results = run_checks(model, seed=int(s["seed"]), opts=_opts(s), quick=bool(s["quick"]))
    rows = [(r.name, r.cases, r.max_residual, r.threshold, r.ok) for r in results]
    write_csv(rows, ["check", "cases", "max_residual", "threshold", "ok"], s["out"])
    return 0 if all(r.ok for r in results) else 1


COMMANDS = {
    "orbit-scan": cmd_orbit_scan, "open-loop": cmd_open_loop, "closed-loop": cmd_closed_loop,
    "compare": cmd_compare, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(presets.PRESETS))
    common.add_argument("--config", help="YAML file with model and run keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--x0", help="initial state, comma separated")
    common.add_argument("--pmax", type=int, help="largest period for orbit scans")
    common.add_argument("--starts", type=int, help="multistart count per period in orbit scans")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="ldempc", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("orbit-scan", parents=[common], help="best orbit per period")
    ol = sub.add_parser("open-loop", parents=[common], help="solve one OCP and print the plan")
    ol.add_argument("--horizon", type=int)
    ol.add_argument("--discount", help="constant | linear | w0,w1,...")
    cl = sub.add_parser("closed-loop", parents=[common], help="simulate one controller")
    cl.add_argument("--controller", help="discounted | undiscounted | pstep:<p>")
    cl.add_argument("--horizon", type=int)
    cl.add_argument("--tsim", type=int)
    cl.add_argument("--keep-plans", action="store_true", default=None)
    cp = sub.add_parser("compare", parents=[common], help="sweep horizons x controllers")
    cp.add_argument("--horizons", help="e.g. 1..20 or 14..20,27")
    cp.add_argument("--controllers", help="comma separated controller list")
    cp.add_argument("--tsim", type=int)
    cp.add_argument("--window", help="transient window T_lo,T_hi (default 25,30)")
    cp.add_argument("--l-star", dest="l_star", type=float, help="skip the orbit scan")
    cp.add_argument("--p-star", dest="p_star", type=int, help="skip the orbit scan")
    vf = sub.add_parser("verify", parents=[common], help="identity and property suite")
    vf.add_argument("--quick", action="store_true", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.command == "open-loop" and args.discount is not None and "," in args.discount:
        args.discount = [float(t) for t in args.discount.split(",")]
    try:
        s = _settings(args)
        model = build_model(s)
        if s.get("tsim") is not None and int(s["tsim"]) < 1:
            raise ValueError("tsim must be >= 1")
        return COMMANDS[args.command](model, s)
    except (ValueError, KeyError, OSError) as exc:
        print(f"ldempc {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
