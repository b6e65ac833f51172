"""Command-line front end: ``ddr-escape {simulate,partition,synthesize,verify}``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import GameParams, InvalidParamsError, ReducedState
from .inverse import NoConvergenceError, OutsideDiskError, rasterize_partition, synthesize
from .io import (ConfigError, load_config, render_partition_svg,
                 render_trajectory_svg, write_partition_csv,
                 write_trajectory_csv)
from .simulator import OptimalEvader, OptimalPursuer, simulate, synthesis_start
from .verification import SWEEP_RHO_L, SWEEP_RHO_V, run_verification

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_TRUNCATED = 2
EXIT_VERIFY_FAILED = 3


def _params_from_args(args) -> GameParams:
    if args.config:
        return load_config(args.config).params
    rho_v = 0.6 if args.rho_v is None else args.rho_v
    rho_l = 2.0 if args.rho_l is None else args.rho_l
    return GameParams.from_ratios(rho_v, rho_l)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    dt = args.dt if args.dt is not None else cfg.dt
    initial = cfg.initial
    if initial is None:
        initial = synthesis_start(cfg.s, cfg.tau, cfg.params)
    traj = simulate(initial, OptimalEvader(), OptimalPursuer(), cfg.params, dt, cfg.t_max)
    out = Path(args.out or "trajectory.csv")
    write_trajectory_csv(traj, out)
    if args.svg:
        render_trajectory_svg(traj, cfg.params, args.svg)
    if traj.truncated:
        print(f"no escape within t_max={cfg.t_max} s; wrote {out}")
        return EXIT_TRUNCATED
    switches = [e.t for e in traj.events if e.kind.value == "switch"]
    print(f"escape at t={traj.escape_time:.6f} s, switches at {switches}; wrote {out}")
    return EXIT_OK


def cmd_partition(args) -> int:
    if args.resolution < 16:
        raise ConfigError(f"resolution must be >= 16, got {args.resolution}")
    params = _params_from_args(args)
    pmap = rasterize_partition(params, args.resolution, workers=args.workers)
    out = Path(args.out or "partition.csv")
    write_partition_csv(pmap, out)
    svg = args.svg if args.svg else out.with_suffix(".svg")
    render_partition_svg(pmap, svg)
    fr = {c.name.lower(): round(v, 6) for c, v in pmap.fractions().items()}
    print(json.dumps({"resolution": args.resolution, "fractions": fr,
                      "grid": str(out), "svg": str(svg)}))
    return EXIT_OK


def cmd_synthesize(args) -> int:
    params = _params_from_args(args)
    if args.x is None or args.y is None:
        raise ConfigError("synthesize needs --x and --y (reduced-space state)")
    res = synthesize(ReducedState(args.x, args.y), params, branch=args.branch)
    doc = {"s": res.s, "tau": res.tau, "phase": res.phase.value, "branch": res.branch.value,
           "u1": res.evader.u1, "u2": res.evader.u2, "v1": res.pursuer.v1,
           "v2": res.pursuer.v2, "lambda_x": res.costate.lambda_x,
           "lambda_y": res.costate.lambda_y}
    text = json.dumps(doc, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    rho_v = tuple(args.rho_v_list) if args.rho_v_list else SWEEP_RHO_V
    rho_l = tuple(args.rho_l_list) if args.rho_l_list else SWEEP_RHO_L
    s_values = tuple(args.s) if args.s else None
    dt = args.dt if args.dt is not None else 1e-4
    rep = run_verification(rho_v, rho_l, s_values=s_values, tol=args.tol, dt=dt)
    text = rep.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    for c in rep.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.3e} (tol {c.tol:g})")
    return EXIT_OK if rep.passed else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddr-escape", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="closed-loop optimal play from a config file")
    sp.add_argument("--config", required=True, help="scenario file (key = value lines)")
    sp.add_argument("--out", help="trajectory CSV path (default trajectory.csv)")
    sp.add_argument("--svg", help="also render the trajectory to this SVG path")
    sp.add_argument("--dt", type=float, help="step size, overrides the config")
    sp.set_defaults(func=cmd_simulate)

    pp = sub.add_parser("partition", help="rasterize the reduced-space partition")
    pp.add_argument("--config", help="take game parameters from a scenario file")
    pp.add_argument("--rho-v", type=float, help="speed ratio (default 0.6)")
    pp.add_argument("--rho-l", type=float, help="radius ratio (default 2)")
    pp.add_argument("--resolution", type=int, default=256, help="cells per axis (>= 16)")
    pp.add_argument("--workers", type=int, default=1)
    pp.add_argument("--out", help="grid CSV path (default partition.csv)")
    pp.add_argument("--svg", help="SVG path (default: grid path with .svg suffix)")
    pp.set_defaults(func=cmd_partition)

    yp = sub.add_parser("synthesize", help="synthesis coordinates of a reduced state")
    yp.add_argument("--config", help="take game parameters from a scenario file")
    yp.add_argument("--rho-v", type=float)
    yp.add_argument("--rho-l", type=float)
    yp.add_argument("--x", type=float)
    yp.add_argument("--y", type=float)
    yp.add_argument("--branch", choices=("upper", "lower"))
    yp.add_argument("--out", help="also write the JSON result here")
    yp.set_defaults(func=cmd_synthesize)

    vp = sub.add_parser("verify", help="run the numerical oracles")
    vp.add_argument("--rho-v", dest="rho_v_list", type=float, action="append",
                    help="restrict the sweep (repeatable)")
    vp.add_argument("--rho-l", dest="rho_l_list", type=float, action="append",
                    help="restrict the sweep (repeatable)")
    vp.add_argument("--s", type=float, action="append", help="test only these angles")
    vp.add_argument("--tol", type=float, help="override every tolerance")
    vp.add_argument("--dt", type=float, help="retro-integration step (default 1e-4)")
    vp.add_argument("--out", help="JSON report path")
    vp.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParamsError, OutsideDiskError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
