"""On-disk artifacts: CSV time series, JSON reports, snapshot sets.

Every writer is deterministic: floats are serialized with repr (exact
round-trip), JSON keys are sorted, CSV follows RFC 4180 (CRLF line
endings), and nothing embeds a timestamp.  Each format has a matching
loader so artifacts can be rebuilt into live objects.
"""

from __future__ import annotations

import csv
import json
import os

from .grids import ScalarField, VectorField, load_field, save_field
from .solver import EnergyLedger, FluidState, Trajectory

__all__ = [
    "load_degiorgi_csv",
    "load_ledger_csv",
    "load_report_json",
    "load_snapshots",
    "load_sweep_csv",
    "load_trajectory",
    "write_degiorgi_csv",
    "write_ledger_csv",
    "write_report_json",
    "write_snapshots",
    "write_sweep_csv",
]

SNAPSHOT_INDEX = "snapshots.csv"
SNAPSHOT_DIR = "snapshots"


def _ensure_parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    return repr(float(value))


# ---------------------------------------------------------------------------
# energy ledger

def write_ledger_csv(path, ledger):
    """One row per recorded step, columns as in EnergyLedger.COLUMNS."""
    _ensure_parent(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EnergyLedger.COLUMNS)
        columns = [ledger.column(c) for c in EnergyLedger.COLUMNS]
        for row in zip(*columns):
            w.writerow([_fmt(v) for v in row])


def load_ledger_csv(path):
    ledger = EnergyLedger()
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != EnergyLedger.COLUMNS:
            raise ValueError(f"{path}: unexpected ledger columns {header}")
        for row in reader:
            ledger.append(**{k: float(v) for k, v in zip(header, row)})
    return ledger


# ---------------------------------------------------------------------------
# JSON reports

def write_report_json(path, payload):
    _ensure_parent(path)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report_json(path):
    with open(path, "r") as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# De Giorgi ladder table

def write_degiorgi_csv(path, report):
    """Level ladder of a DeGiorgiReport: columns k, C_k, U_k."""
    _ensure_parent(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "C_k", "U_k"])
        for k, (c, u) in enumerate(zip(report.levels, report.energies)):
            w.writerow([str(k), _fmt(c), _fmt(u)])


def load_degiorgi_csv(path):
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["k", "C_k", "U_k"]:
            raise ValueError(f"{path}: unexpected ladder columns {header}")
        ks, cs_, us = [], [], []
        for row in reader:
            ks.append(int(row[0]))
            cs_.append(float(row[1]))
            us.append(float(row[2]))
    return {"k": ks, "C_k": cs_, "U_k": us}


# ---------------------------------------------------------------------------
# sweep flat table

def _sweep_columns(report):
    est_keys = pairing_keys = ()
    for lvl in report.levels:
        if lvl.ok:
            est_keys = tuple(sorted(lvl.estimates))
            pairing_keys = tuple(sorted(lvl.pairings))
            break
    head = ["value", "ok", "steps", "min_theta"]
    head += list(est_keys)
    head += ["theta3_high", "theta3_low"]
    head += [f"pairing {k}" for k in pairing_keys]
    return head, est_keys, pairing_keys


def write_sweep_csv(path, report):
    """One row per schedule level; failed levels keep blank metric cells."""
    _ensure_parent(path)
    head, est_keys, pairing_keys = _sweep_columns(report)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(head)
        for lvl in report.levels:
            row = [_fmt(lvl.value), "1" if lvl.ok else "0", str(lvl.steps)]
            if lvl.ok:
                row.append(_fmt(lvl.min_theta))
                row += [_fmt(lvl.estimates[k]) for k in est_keys]
                row += [_fmt(lvl.theta_cubed_split[0]), _fmt(lvl.theta_cubed_split[1])]
                row += [_fmt(lvl.pairings[k]) for k in pairing_keys]
            else:
                row += [""] * (len(head) - 3)
            w.writerow(row)


def load_sweep_csv(path):
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for raw in reader:
            row = {}
            for key, cell in zip(header, raw):
                if key == "ok":
                    row[key] = cell == "1"
                elif key == "steps":
                    row[key] = int(cell) if cell else 0
                else:
                    row[key] = float(cell) if cell else None
            rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# trajectory snapshots

def write_snapshots(out_dir, traj):
    """Binary field files plus a CSV index mapping indices to times."""
    snap_dir = os.path.join(out_dir, SNAPSHOT_DIR)
    os.makedirs(snap_dir, exist_ok=True)
    index_rows = []
    for i, (t, st) in enumerate(zip(traj.times, traj.states)):
        names = {}
        for part, fld in (("rho", st.rho), ("u", st.u), ("theta", st.theta)):
            fname = f"snap_{i:04d}_{part}.field"
            save_field(os.path.join(snap_dir, fname), fld)
            names[part] = fname
        index_rows.append((i, t, names["rho"], names["u"], names["theta"]))
    with open(os.path.join(out_dir, SNAPSHOT_INDEX), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "t", "rho_file", "u_file", "theta_file"])
        for i, t, fr, fu, fth in index_rows:
            w.writerow([str(i), _fmt(t), fr, fu, fth])


def load_snapshots(out_dir):
    """Rebuild (times, states) from a snapshot index and its field files."""
    index_path = os.path.join(out_dir, SNAPSHOT_INDEX)
    snap_dir = os.path.join(out_dir, SNAPSHOT_DIR)
    times, states = [], []
    with open(index_path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["index", "t", "rho_file", "u_file", "theta_file"]:
            raise ValueError(f"{index_path}: unexpected index columns {header}")
        for row in reader:
            t = float(row[1])
            rho = load_field(os.path.join(snap_dir, row[2]))
            u = load_field(os.path.join(snap_dir, row[3]))
            theta = load_field(os.path.join(snap_dir, row[4]))
            # the binary header cannot distinguish a 1d vector from a
            # scalar (both have one component); the index column can
            if isinstance(u, ScalarField):
                u = VectorField(u.grid, u.data[None, ...])
            times.append(t)
            states.append(FluidState(rho, u, theta, t))
    return times, states


def load_trajectory(out_dir, cs, params):
    """Reassemble a Trajectory from ledger.csv and the snapshot set.

    The time step is recovered from the ledger's time column, which
    records every step.
    """
    ledger = load_ledger_csv(os.path.join(out_dir, "ledger.csv"))
    t = ledger.column("t")
    if t.size < 2:
        raise ValueError(f"{out_dir}: ledger holds fewer than two rows")
    dt = float(t[1] - t[0])
    times, states = load_snapshots(out_dir)
    if not states:
        raise ValueError(f"{out_dir}: no snapshots found")
    grid = states[0].grid
    meta = {"steps": int(t.size - 1), "clamped_cells": int(ledger.column("clamped_cells")[-1])}
    return Trajectory(grid, cs, params, dt, times, states, ledger, meta)
