"""Run configuration files: flat key-value text with sections.

The format is INI-style and diffable.  Every key is typed against a
fixed schema; unknown sections or keys, missing required keys, and
unparseable values are all reported together with the line they occur
on, so a broken file yields one actionable message instead of a stack
trace.

A loaded RunConfig can build its constitutive set, its regularized
initial data, and a resolved time step, and it carries the single seed
that feeds every randomized diagnostic.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field, replace

from .constitutive import PRESETS, preset_set, validate_hypotheses
from .grids import GridSpec
from .initdata import make_initial_data, regularize_initial_data
from .solver import FluidState, RegularizationParams, suggest_dt
from .grids import ScalarField, VectorField

__all__ = ["ConfigError", "RunConfig", "load_config"]

SWEEP_CHOICES = ("epsilon", "eta", "delta")
INITIAL_PRESETS = ("uniform", "gaussian-bump", "two-bump", "shear", "mixing")


class ConfigError(Exception):
    """Malformed configuration; collects (line, message) diagnostics."""

    def __init__(self, path, diagnostics):
        self.path = path
        self.diagnostics = list(diagnostics)
        lines = [
            f"{path}:{ln}: {msg}" if ln else f"{path}: {msg}"
            for ln, msg in self.diagnostics
        ]
        super().__init__("\n".join(lines))


# ---------------------------------------------------------------------------
# value parsers; each raises ValueError with a human-readable reason

def _float(s):
    return float(s)


def _pos_float(s):
    v = float(s)
    if not v > 0.0:
        raise ValueError(f"must be positive, got {v}")
    return v


def _nonneg_float(s):
    v = float(s)
    if not v >= 0.0:
        raise ValueError(f"must be nonnegative, got {v}")
    return v


def _pos_int(s):
    v = int(s)
    if v <= 0:
        raise ValueError(f"must be a positive integer, got {v}")
    return v


def _int(s):
    return int(s)


def _bool(s):
    t = s.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {s!r}")


def _str(s):
    return s.strip()


def _floats_csv(s):
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of numbers")
    return tuple(float(p) for p in parts)


def _ints_csv(s):
    parts = [p.strip() for p in s.split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of integers")
    return tuple(int(p) for p in parts)


def _dt_value(s):
    t = s.strip().lower()
    if t == "auto":
        return None
    return _pos_float(s)


def _law_preset(s):
    name = s.strip()
    if name not in PRESETS:
        raise ValueError(f"unknown law preset {name!r}; have {sorted(PRESETS)}")
    return name


def _initial_preset(s):
    name = s.strip()
    if name not in INITIAL_PRESETS:
        raise ValueError(
            f"unknown initial preset {name!r}; have {list(INITIAL_PRESETS)}"
        )
    return name


def _sweep_param(s):
    name = s.strip()
    if name not in SWEEP_CHOICES:
        raise ValueError(f"sweep param must be one of {SWEEP_CHOICES}")
    return name


_REQUIRED = object()

# section -> key -> (parser, default); _REQUIRED marks mandatory keys.
_SCHEMA = {
    "grid": {
        "extents": (_floats_csv, _REQUIRED),
        "cells": (_ints_csv, _REQUIRED),
    },
    "time": {
        "t_end": (_pos_float, _REQUIRED),
        "dt": (_dt_value, None),
        "dt_safety": (_pos_float, 1.0),
        "snapshot_stride": (_pos_int, 10),
    },
    "laws": {
        "preset": (_law_preset, _REQUIRED),
        # optional overrides of the preset's coefficients
        "gamma": (_float, None),
        "pe_coeff": (_float, None),
        "r": (_float, None),
        "pth_coeff": (_float, None),
        "pth_exponent": (_float, None),
        "mu0": (_float, None),
        "mu1": (_float, None),
        "lam0": (_float, None),
        "lam1": (_float, None),
        "kappa0": (_float, None),
    },
    "regularization": {
        "epsilon": (_nonneg_float, _REQUIRED),
        "eta": (_nonneg_float, _REQUIRED),
        "delta": (_nonneg_float, _REQUIRED),
        "beta": (_float, _REQUIRED),
    },
    "initial": {
        "preset": (_initial_preset, _REQUIRED),
        "rho_base": (_float, 1.0),
        "rho_amp": (_float, 0.0),
        "theta_base": (_float, 1.0),
        "theta_amp": (_float, 0.0),
        "u_amp": (_float, 0.0),
        "bump_center": (_float, 0.5),
        "bump_width": (_float, 0.1),
        "theta_floor": (_pos_float, 0.5),
        "theta_ceil": (_pos_float, None),
        "sigma0": (_nonneg_float, 2.0),
    },
    "output": {
        "dir": (_str, "out"),
        "seed": (_int, 0),
    },
    "diagnostics": {
        "energy": (_bool, True),
        "renorm": (_bool, True),
        "renorm_xi": (_pos_float, 1.0),
        "poincare": (_bool, False),
        "poincare_samples": (_pos_int, 200),
        "poincare_m1": (_pos_float, 1.0),
        "poincare_m2": (_pos_float, 3.0),
    },
    "degiorgi": {
        "m": (_pos_float, None),
        "omega": (_nonneg_float, 1e-6),
        "k_max": (_pos_int, 30),
        "alpha": (_pos_float, 2.0),
    },
    "sweep": {
        "param": (_sweep_param, "delta"),
        "levels": (_floats_csv, (1e-1, 1e-2, 1e-3)),
    },
}

# keys whose canonical spelling differs from the lowercased file key
_KEY_ALIASES = {("laws", "r"): "R", ("degiorgi", "m"): "M"}

_LAW_OVERRIDE_KEYS = (
    "gamma", "pe_coeff", "R", "pth_coeff", "pth_exponent",
    "mu0", "mu1", "lam0", "lam1", "kappa0",
)

_INITIAL_KW_KEYS = (
    "rho_base", "rho_amp", "theta_base", "theta_amp", "u_amp",
    "bump_center", "bump_width",
)


@dataclass
class RunConfig:
    """Fully resolved run description; see _SCHEMA for the file format."""

    grid: GridSpec
    t_end: float
    dt: float | None          # None means the auto stability policy
    dt_safety: float
    snapshot_stride: int
    law_preset: str
    law_overrides: dict
    params: RegularizationParams
    initial_preset: str
    initial_kwargs: dict
    theta_floor: float
    theta_ceil: float | None
    sigma0: float
    out_dir: str
    seed: int
    diagnostics: dict = field(default_factory=dict)
    degiorgi: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    source_path: str = ""

    def constitutive(self):
        return preset_set(self.law_preset, **self.law_overrides)

    def initial_data(self):
        raw = make_initial_data(self.grid, self.initial_preset, **self.initial_kwargs)
        return regularize_initial_data(
            raw, self.params.delta, self.params.beta,
            self.theta_floor, self.theta_ceil, self.sigma0,
        )

    def resolve_dt(self, cs, init):
        """Explicit dt if given, else the stability envelope times a margin."""
        if self.dt is not None:
            return self.dt
        rho = init.rho.data
        u = init.momentum.data / rho[None, ...]
        state = FluidState(
            ScalarField(self.grid, rho.copy()),
            VectorField(self.grid, u),
            init.theta.copy(),
            0.0,
        )
        return self.dt_safety * suggest_dt(state, cs, self.params)

    def degiorgi_level_scale(self):
        """Configured M, or one derived from the temperature floor.

        The derived value satisfies exp(-M/2) < theta_floor with a 10%
        margin in M, which is what the certificate chain needs on data
        that respects the floor.
        """
        if self.degiorgi.get("M") is not None:
            return self.degiorgi["M"]
        return 1.1 * max(1.0, -2.0 * math.log(self.theta_floor))

    def validate(self):
        return validate_hypotheses(self.constitutive(), self.params.beta)

    def with_overrides(self, out_dir=None, seed=None):
        cfg = self
        if out_dir is not None:
            cfg = replace(cfg, out_dir=str(out_dir))
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        return cfg

    def describe(self):
        """Resolved plan, one setting per line (the --dry-run output)."""
        dt_line = repr(self.dt) if self.dt is not None else (
            f"auto (stability envelope x {self.dt_safety})"
        )
        lines = [
            f"grid: extents={self.grid.extents} cells={self.grid.cells}",
            f"time: t_end={self.t_end} dt={dt_line} "
            f"snapshot_stride={self.snapshot_stride}",
            f"laws: preset={self.law_preset} overrides={self.law_overrides}",
            f"regularization: epsilon={self.params.epsilon} eta={self.params.eta} "
            f"delta={self.params.delta} beta={self.params.beta}",
            f"initial: preset={self.initial_preset} kwargs={self.initial_kwargs} "
            f"theta_floor={self.theta_floor} theta_ceil={self.theta_ceil} "
            f"sigma0={self.sigma0}",
            f"output: dir={self.out_dir} seed={self.seed}",
            f"diagnostics: {self.diagnostics}",
            f"degiorgi: M={self.degiorgi_level_scale()} "
            f"omega={self.degiorgi['omega']} k_max={self.degiorgi['k_max']} "
            f"alpha={self.degiorgi['alpha']}",
            f"sweep: param={self.sweep['param']} levels={self.sweep['levels']}",
        ]
        return "\n".join(lines)

    def to_dict(self):
        return {
            "grid": {"extents": list(self.grid.extents), "cells": list(self.grid.cells)},
            "t_end": self.t_end,
            "dt": self.dt,
            "dt_safety": self.dt_safety,
            "snapshot_stride": self.snapshot_stride,
            "law_preset": self.law_preset,
            "law_overrides": dict(self.law_overrides),
            "regularization": {
                "epsilon": self.params.epsilon,
                "eta": self.params.eta,
                "delta": self.params.delta,
                "beta": self.params.beta,
            },
            "initial": {
                "preset": self.initial_preset,
                **self.initial_kwargs,
                "theta_floor": self.theta_floor,
                "theta_ceil": self.theta_ceil,
                "sigma0": self.sigma0,
            },
            "out_dir": self.out_dir,
            "seed": self.seed,
            "diagnostics": dict(self.diagnostics),
            "degiorgi": dict(self.degiorgi),
            "sweep": {
                "param": self.sweep["param"],
                "levels": list(self.sweep["levels"]),
            },
        }


# ---------------------------------------------------------------------------
# parsing

def _line_index(text):
    """Map (section, key) and (section,) to 1-based line numbers."""
    index = {}
    section = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            index.setdefault((section,), ln)
            continue
        for sep in ("=", ":"):
            if sep in line:
                key = line.split(sep, 1)[0].strip().lower()
                if section is not None:
                    index.setdefault((section, key), ln)
                break
    return index


def load_config(path):
    """Parse and type-check a run configuration file.

    Raises ConfigError carrying every diagnostic found, each with the
    line it refers to.
    """
    if not os.path.exists(path):
        raise ConfigError(path, [(0, "no such file")])
    with open(path, "r") as fh:
        text = fh.read()

    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";")
    )
    try:
        parser.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(path, [(exc.lineno, "entry before any [section] header")])
    except configparser.ParsingError as exc:
        diags = [(ln, f"cannot parse line: {line.strip()}") for ln, line in exc.errors]
        raise ConfigError(path, diags or [(0, str(exc))])
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(path, [(exc.lineno, f"duplicate key {exc.option!r}")])
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(path, [(exc.lineno, f"duplicate section {exc.section!r}")])

    lines = _line_index(text)
    diags = []
    values = {}

    for section in parser.sections():
        sec = section.lower()
        if sec not in _SCHEMA:
            diags.append(
                (lines.get((sec,), 0), f"unknown section [{section}]")
            )
            continue
        for key in parser[section]:
            k = key.lower()
            if k not in _SCHEMA[sec]:
                diags.append(
                    (lines.get((sec, k), 0), f"unknown key {key!r} in [{section}]")
                )

    for sec, keys in _SCHEMA.items():
        present = {k.lower() for k in parser[sec]} if parser.has_section(sec) else set()
        for key, (parse, default) in keys.items():
            canonical = _KEY_ALIASES.get((sec, key), key)
            if key in present:
                raw = parser[sec][key]
                try:
                    values[(sec, canonical)] = parse(raw)
                except ValueError as exc:
                    diags.append(
                        (lines.get((sec, key), 0), f"[{sec}] {key}: {exc}")
                    )
            elif default is _REQUIRED:
                diags.append(
                    (
                        lines.get((sec,), 0),
                        f"missing required key {key!r} in [{sec}]",
                    )
                )
            else:
                values[(sec, canonical)] = default

    if diags:
        raise ConfigError(path, sorted(diags))

    extents = values[("grid", "extents")]
    cells = values[("grid", "cells")]
    try:
        grid = GridSpec(tuple(extents), tuple(cells))
    except ValueError as exc:
        raise ConfigError(path, [(lines.get(("grid",), 0), f"[grid]: {exc}")])

    try:
        params = RegularizationParams(
            values[("regularization", "epsilon")],
            values[("regularization", "eta")],
            values[("regularization", "delta")],
            values[("regularization", "beta")],
        )
    except ValueError as exc:
        raise ConfigError(
            path, [(lines.get(("regularization",), 0), f"[regularization]: {exc}")]
        )

    overrides = {
        k: values[("laws", k)]
        for k in _LAW_OVERRIDE_KEYS
        if values.get(("laws", k)) is not None
    }
    initial_kwargs = {k: values[("initial", k)] for k in _INITIAL_KW_KEYS}

    return RunConfig(
        grid=grid,
        t_end=values[("time", "t_end")],
        dt=values[("time", "dt")],
        dt_safety=values[("time", "dt_safety")],
        snapshot_stride=values[("time", "snapshot_stride")],
        law_preset=values[("laws", "preset")],
        law_overrides=overrides,
        params=params,
        initial_preset=values[("initial", "preset")],
        initial_kwargs=initial_kwargs,
        theta_floor=values[("initial", "theta_floor")],
        theta_ceil=values[("initial", "theta_ceil")],
        sigma0=values[("initial", "sigma0")],
        out_dir=values[("output", "dir")],
        seed=values[("output", "seed")],
        diagnostics={
            "energy": values[("diagnostics", "energy")],
            "renorm": values[("diagnostics", "renorm")],
            "renorm_xi": values[("diagnostics", "renorm_xi")],
            "poincare": values[("diagnostics", "poincare")],
            "poincare_samples": values[("diagnostics", "poincare_samples")],
            "poincare_m1": values[("diagnostics", "poincare_m1")],
            "poincare_m2": values[("diagnostics", "poincare_m2")],
        },
        degiorgi={
            "M": values[("degiorgi", "M")],
            "omega": values[("degiorgi", "omega")],
            "k_max": values[("degiorgi", "k_max")],
            "alpha": values[("degiorgi", "alpha")],
        },
        sweep={
            "param": values[("sweep", "param")],
            "levels": values[("sweep", "levels")],
        },
        source_path=path,
    )
