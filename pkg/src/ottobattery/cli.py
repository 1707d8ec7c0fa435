"""Command-line front end: trajectories, sweeps, portraits, switching runs."""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import analytic, runner, switching


def _add_common(sp, config_required=True):
    sp.add_argument("--config", required=config_required,
                    help="TOML experiment file")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")


def _monitoring_arg(sp):
    sp.add_argument("--monitoring", choices=("unmeasured", "per-cycle"),
                    help="override the config's monitoring scheme")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="ottobattery",
        description="Cycle-resolved simulations of a two-level thermal "
                    "machine charging a ladder battery.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="single trajectory")
    _add_common(run_p)
    _monitoring_arg(run_p)
    run_p.add_argument("--cycles", type=int, help="override cycle count")

    sweep_p = sub.add_parser("sweep", help="trajectory per grid point")
    _add_common(sweep_p)
    _monitoring_arg(sweep_p)
    sweep_p.add_argument("--cycles", type=int, help="override cycle count")
    sweep_p.add_argument("--threads", type=int, default=1,
                         help="grid points evaluated in parallel")

    port_p = sub.add_parser("phase-portrait",
                            help="closed-form machine-mode map on an "
                                 "(alpha, eta) grid")
    port_p.add_argument("--x", type=float, default=2.0,
                        help="hot-to-cold splitting ratio")
    port_p.add_argument("--points", type=int, default=100,
                        help="grid points per axis")
    port_p.add_argument("--out", default=".")
    port_p.add_argument("--format", choices=("csv", "json"), default="csv")

    sw_p = sub.add_parser("switching",
                          help="periodically toggled coupling, no drive")
    sw_p.add_argument("--periods", type=int, default=1000)
    sw_p.add_argument("--levels", type=int, default=30)
    sw_p.add_argument("--coupling", type=float, default=1.0)
    sw_p.add_argument("--out", default=".")
    sw_p.add_argument("--format", choices=("csv", "json"), default="csv")

    sub.add_parser("validate", help="run the built-in oracle checks")
    return ap


def _apply_overrides(cfg, args):
    changes = {}
    if getattr(args, "monitoring", None):
        changes["monitoring"] = args.monitoring.replace("-", "_")
    if getattr(args, "cycles", None):
        changes["cycles"] = args.cycles
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _cmd_run(args):
    cfg = _apply_overrides(runner.load_config(args.config), args)
    out = runner.run_trajectory(cfg)
    paths = runner.emit(out, fmt=args.format, out_dir=args.out)
    for p in paths:
        print(p)
    print(f"mode={out.mode_detected} n_star={out.n_star} n_hash={out.n_hash} "
          f"steps={out.step_count} wall={out.wall_time:.1f}s")
    return 0


def _cmd_sweep(args):
    cfg = _apply_overrides(runner.load_config(args.config), args)
    outs = runner.run_sweep(cfg, threads=args.threads)
    paths = runner.emit(outs, fmt=args.format, out_dir=args.out)
    for p in paths:
        print(p)
    return 0


def _cmd_portrait(args):
    n = args.points
    alphas = np.linspace(0.0, 1.0, n)
    # eta = 0 would mean an infinitely hot cold bath; keep strictly inside
    etas = np.linspace(args.x / n, args.x * (1.0 - 1.0 / n), n)
    cells = analytic.phase_portrait(alphas, etas, x=args.x)
    paths = runner.emit_portrait(cells, fmt=args.format, out_dir=args.out)
    for p in paths:
        print(p)
    return 0


def _cmd_switching(args):
    p = switching.SwitchingParams(
        delta=30.0, field=200.0, coupling=args.coupling, on_time=1.0,
        off_time=1.0, levels=args.levels, beta=1 / 20.0, periods=args.periods,
    )
    series = switching.simulate_switching(p)
    slope, stderr = switching.drift_fit(series.times, series.battery_energy)
    from pathlib import Path
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        path = out_dir / "switching.csv"
        rows = [["time", "e_battery", "e_system"]]
        rows += [[t, b, s] for t, b, s in
                 zip(series.times, series.battery_energy, series.system_energy)]
        runner._write_lines(path, rows)
    else:
        import json
        path = out_dir / "switching.json"
        payload = {
            "schema_version": runner.SCHEMA_VERSION,
            "params": dataclasses.asdict(p),
            "times": series.times.tolist(),
            "e_battery": series.battery_energy.tolist(),
            "e_system": series.system_energy.tolist(),
            "drift_slope": slope,
            "drift_stderr": stderr,
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)
            fh.write("\n")
    print(path)
    print(f"drift slope {slope:.3e} +- {stderr:.3e} over {args.periods} periods")
    return 0


def _cmd_validate(_args):
    return 0 if runner.validate(verbose=True) else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "sweep": _cmd_sweep,
        "phase-portrait": _cmd_portrait,
        "switching": _cmd_switching,
        "validate": _cmd_validate,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
