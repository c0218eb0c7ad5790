#!/usr/bin/env python
"""Drive the command line interface programmatically and read back its
artifacts.  Useful as a smoke test of the full plumbing without a
shell.  Writes under ./demo_out (safe to delete)."""

import json
import pathlib

from nslab import cli
from nslab.artifacts import load_ledger_csv, load_trajectory
from nslab.config import load_config

HERE = pathlib.Path(__file__).resolve().parent
out = HERE / "demo_out"

config_text = """\
[grid]
extents = 1.0
cells = 64

[time]
t_end = 0.05
dt = 0.001
snapshot_stride = 5

[laws]
preset = ideal-like

[regularization]
epsilon = 0.01
eta = 0.01
delta = 0.05
beta = 5.0

[initial]
preset = mixing
rho_amp = 0.2
theta_base = 0.8
u_amp = 0.1
theta_floor = 0.4

[output]
dir = demo_out
seed = 7
"""

out.mkdir(exist_ok=True)
cfg_path = out / "run.ini"
cfg_path.write_text(config_text)

rc = cli.main(["validate", "--config", str(cfg_path)])
print("validate exit code:", rc)
print()

rc = cli.main(["simulate", "--config", str(cfg_path), "--out", str(out / "run")])
print("simulate exit code:", rc)

ledger = load_ledger_csv(out / "run" / "ledger.csv")
print("ledger rows:", len(ledger.t),
      " final total energy:", ledger.total[-1])

report = json.loads((out / "run" / "report.json").read_text())
print("report checks:", ", ".join(sorted(report["checks"])))

cfg = load_config(cfg_path)
traj = load_trajectory(out / "run", cfg.constitutive(), cfg.params)
print("reloaded trajectory: dt =", traj.dt, " snapshots =", len(traj.states))

rc = cli.main(["degiorgi", "--config", str(cfg_path), "--out", str(out / "dg")])
print()
print("degiorgi exit code:", rc)
dg = json.loads((out / "dg" / "degiorgi_report.json").read_text())
print("certificate:", dg["certificate"], " grade:", dg["grade"])
