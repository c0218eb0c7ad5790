"""Command-line entry point.

Commands:
  validate   check the configured material laws against the hypotheses
  simulate   run the time stepper; write snapshots, ledger.csv, report.json
  degiorgi   run + level-energy analysis; write degiorgi.csv, degiorgi_report.json
  sweep      vanishing-regularization study; write sweep_report.json, sweep.csv
  report     rebuild report.json from artifacts already on disk

Exit codes: 0 success, 1 failed checks or runtime errors (partial
artifacts are kept), 2 malformed configuration or usage.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import artifacts
from .config import SWEEP_CHOICES, ConfigError, load_config
from .constitutive import make_renormalizer
from .continuation import parameter_sweep
from .degiorgi import DeGiorgiConfig, verify_recursion
from .diagnostics import (
    energy_inequality_check,
    poincare_batch,
    renorm_temperature_residual,
)
from .solver import SolverError, simulate

__all__ = ["main"]


def build_parser():
    p = argparse.ArgumentParser(
        prog="nslab",
        description="desk-scale laboratory for a regularized compressible "
        "heat-conducting flow system",
    )
    sub = p.add_subparsers(dest="command", required=True)
    specs = {
        "validate": "check material-law hypotheses; exit 0 iff all pass",
        "simulate": "march the configured run and write its artifacts",
        "degiorgi": "run, then compute the temperature-floor certificate",
        "sweep": "rerun while one regularization parameter decreases",
        "report": "recompute report.json from existing artifacts",
    }
    for name, help_text in specs.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="path to the run configuration")
        if name != "validate":
            sp.add_argument("--out", default=None, help="output directory override")
            sp.add_argument("--seed", type=int, default=None, help="seed override")
            sp.add_argument(
                "--dry-run", action="store_true",
                help="print the resolved plan and exit",
            )
        if name == "sweep":
            sp.add_argument(
                "--param", default=None, choices=SWEEP_CHOICES,
                help="which regularization parameter to drive down",
            )
            sp.add_argument(
                "--levels", default=None,
                help="comma-separated decreasing schedule, e.g. 1e-1,1e-2,1e-3",
            )
    return p


# ---------------------------------------------------------------------------
# report assembly

def _series(arr):
    return [float(v) for v in np.asarray(arr).ravel()]


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _ledger_summary(ledger):
    mass = ledger.column("mass")
    total = ledger.column("total")
    drift = 0.0
    if mass.size and mass[0] != 0.0:
        drift = float(np.max(np.abs(mass - mass[0])) / abs(mass[0]))
    return {
        "rows": int(mass.size),
        "initial_total": float(total[0]) if total.size else None,
        "final_total": float(total[-1]) if total.size else None,
        "dissipation": {
            "stress": float(ledger.column("diss_stress")[-1]),
            "velocity": float(ledger.column("diss_eta")[-1]),
            "sink": float(ledger.column("diss_sink")[-1]),
        }
        if mass.size
        else None,
        "mass_drift": drift,
        "min_theta": float(np.min(ledger.column("min_theta"))) if mass.size else None,
        "clamped_cells": int(ledger.column("clamped_cells")[-1]) if mass.size else None,
    }


def _inequality_payload(rep):
    out = {
        "passed": rep.passed,
        "residual": _series(rep.residual),
        "tolerance": _series(rep.tolerance),
    }
    if rep.times is not None:
        out["times"] = _series(rep.times)
    if rep.labels is not None:
        out["labels"] = list(rep.labels)
    out["meta"] = {k: _jsonable(v) for k, v in rep.meta.items()}
    return out


def _report_payload(cfg, cs, traj, dt, aborted=None):
    checks = {}
    if cfg.diagnostics["energy"] and len(traj.ledger.column("t")) >= 2:
        checks["energy_inequality"] = _inequality_payload(
            energy_inequality_check(traj)
        )
    if cfg.diagnostics["renorm"] and len(traj.times) >= 2:
        renorm = make_renormalizer(
            "shifted_reciprocal", cs=cs, xi=cfg.diagnostics["renorm_xi"]
        )
        checks["renormalized_temperature"] = _inequality_payload(
            renorm_temperature_residual(traj, renorm)
        )
    if cfg.diagnostics["poincare"]:
        try:
            batch = poincare_batch(
                traj.grid,
                cs.gamma,
                cfg.diagnostics["poincare_m1"],
                cfg.diagnostics["poincare_m2"],
                n_samples=cfg.diagnostics["poincare_samples"],
                seed=cfg.seed,
            )
        except ValueError as exc:
            # infeasible moment caps are a config problem, not a run
            # failure; record it instead of dying mid-report
            checks["poincare"] = {"error": str(exc), "seed": cfg.seed}
        else:
            checks["poincare"] = {
                "sup_ratio": batch.sup_ratio,
                "mean_ratio": float(np.mean(batch.ratios)),
                "samples": int(batch.ratios.size),
                "seed": cfg.seed,
            }
    return {
        "config": cfg.to_dict(),
        "resolved_dt": dt,
        "aborted": aborted,
        "ledger": _ledger_summary(traj.ledger),
        "checks": checks,
    }


# ---------------------------------------------------------------------------
# commands

def _validated(cfg):
    """Run the hypothesis validators; print and fail before any run."""
    rep = cfg.validate()
    if not rep.all_passed:
        print(str(rep))
        print("hypothesis check: FAIL")
        return False
    return True


def _prepare(cfg):
    cs = cfg.constitutive()
    init = cfg.initial_data()
    dt = cfg.resolve_dt(cs, init)
    return cs, init, dt


def cmd_validate(cfg, args):
    rep = cfg.validate()
    print(str(rep))
    print("hypothesis check:", "PASS" if rep.all_passed else "FAIL")
    return 0 if rep.all_passed else 1


def cmd_simulate(cfg, args):
    if args.dry_run:
        print(cfg.describe())
        print(f"plan: simulate -> {cfg.out_dir}/ledger.csv, report.json, snapshots/")
        return 0
    if not _validated(cfg):
        return 1
    cs, init, dt = _prepare(cfg)
    aborted = None
    try:
        traj = simulate(cs, init, cfg.params, dt, cfg.t_end, cfg.snapshot_stride)
    except SolverError as exc:
        traj = exc.partial_trajectory
        aborted = {"stage": exc.stage, "message": str(exc)}
        print(f"solver aborted in {exc.stage}: {exc}", file=sys.stderr)
    if traj is not None:
        artifacts.write_ledger_csv(os.path.join(cfg.out_dir, "ledger.csv"), traj.ledger)
        artifacts.write_snapshots(cfg.out_dir, traj)
        payload = _report_payload(cfg, cs, traj, dt, aborted)
        artifacts.write_report_json(os.path.join(cfg.out_dir, "report.json"), payload)
        print(f"wrote {cfg.out_dir}/ledger.csv, report.json, "
              f"{len(traj.states)} snapshots")
    return 0 if aborted is None else 1


def cmd_degiorgi(cfg, args):
    M = cfg.degiorgi_level_scale()
    if args.dry_run:
        print(cfg.describe())
        print(f"plan: degiorgi (M={M}) -> {cfg.out_dir}/degiorgi.csv, "
              "degiorgi_report.json, ledger.csv")
        return 0
    if not _validated(cfg):
        return 1
    cs, init, dt = _prepare(cfg)
    try:
        traj = simulate(cs, init, cfg.params, dt, cfg.t_end, cfg.snapshot_stride)
    except SolverError as exc:
        if exc.partial_trajectory is not None:
            artifacts.write_ledger_csv(
                os.path.join(cfg.out_dir, "ledger.csv"), exc.partial_trajectory.ledger
            )
        print(f"solver aborted in {exc.stage}: {exc}", file=sys.stderr)
        return 1
    dg_cfg = DeGiorgiConfig(
        M=M,
        omega=cfg.degiorgi["omega"],
        k_max=cfg.degiorgi["k_max"],
        alpha=cfg.degiorgi["alpha"],
    )
    report = verify_recursion(traj, cs, cfg.params, dg_cfg)
    artifacts.write_ledger_csv(os.path.join(cfg.out_dir, "ledger.csv"), traj.ledger)
    artifacts.write_degiorgi_csv(os.path.join(cfg.out_dir, "degiorgi.csv"), report)
    artifacts.write_report_json(
        os.path.join(cfg.out_dir, "degiorgi_report.json"), report.to_dict()
    )
    grade = report.grade or "no certificate"
    print(f"wrote {cfg.out_dir}/degiorgi.csv, degiorgi_report.json ({grade})")
    return 0


def cmd_sweep(cfg, args):
    param = args.param or cfg.sweep["param"]
    if args.levels is not None:
        try:
            schedule = tuple(float(v) for v in args.levels.split(",") if v.strip())
        except ValueError:
            print(f"--levels: cannot parse {args.levels!r} as numbers", file=sys.stderr)
            return 2
    else:
        schedule = tuple(cfg.sweep["levels"])
    if args.dry_run:
        print(cfg.describe())
        print(f"plan: sweep {param} over {list(schedule)} -> "
              f"{cfg.out_dir}/sweep_report.json, sweep.csv")
        return 0
    if not _validated(cfg):
        return 1
    cs, init, dt = _prepare(cfg)
    try:
        report = parameter_sweep(
            cs, init, cfg.params, dt, cfg.t_end, param,
            schedule=schedule, snapshot_stride=cfg.snapshot_stride,
        )
    except ValueError as exc:
        print(f"sweep: {exc}", file=sys.stderr)
        return 2
    artifacts.write_report_json(
        os.path.join(cfg.out_dir, "sweep_report.json"), report.to_dict()
    )
    artifacts.write_sweep_csv(os.path.join(cfg.out_dir, "sweep.csv"), report)
    failed = sum(1 for lvl in report.levels if not lvl.ok)
    print(f"wrote {cfg.out_dir}/sweep_report.json, sweep.csv "
          f"({report.verdict}; {failed} failed levels)")
    return 0


def cmd_report(cfg, args):
    if args.dry_run:
        print(cfg.describe())
        print(f"plan: rebuild {cfg.out_dir}/report.json from ledger.csv + snapshots/")
        return 0
    if not _validated(cfg):
        return 1
    cs = cfg.constitutive()
    try:
        traj = artifacts.load_trajectory(cfg.out_dir, cs, cfg.params)
    except (OSError, ValueError) as exc:
        print(f"report: cannot rebuild trajectory: {exc}", file=sys.stderr)
        return 1
    payload = _report_payload(cfg, cs, traj, traj.dt)
    artifacts.write_report_json(os.path.join(cfg.out_dir, "report.json"), payload)
    print(f"wrote {cfg.out_dir}/report.json")
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "simulate": cmd_simulate,
    "degiorgi": cmd_degiorgi,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    cfg = cfg.with_overrides(
        out_dir=getattr(args, "out", None), seed=getattr(args, "seed", None)
    )
    return _COMMANDS[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
