"""
Material laws and the admissibility gate
========================================

Builds the three stock coefficient sets, runs the structural
hypothesis checks on each, and probes a few renormalizer families.
Everything prints; nothing is written to disk.
"""

import numpy as np

from nslab.constitutive import PRESETS, make_renormalizer, preset_set, validate_hypotheses

print("stock presets:", ", ".join(sorted(PRESETS)))
print()

for name in sorted(PRESETS):
    cs = preset_set(name)
    report = validate_hypotheses(cs, beta=5.0)
    if report.all_passed:
        verdict = f"ok ({len(report.checks)} checks)"
    else:
        verdict = "FAILED: " + "; ".join(c.name for c in report.failures())
    print(f"{name:14s} gamma={cs.gamma:<4g} hypothesis check {verdict}")

print()
print("coefficient values at a few temperatures")
theta = np.array([0.0, 0.5, 1.0, 2.0, 5.0])
cs = preset_set("degenerate")
print("  theta :", theta)
print("  mu    :", cs.mu(theta))
print("  lam   :", cs.lam(theta))
print("  kappa :", cs.kappa(theta))

# a viscosity that may vanish at zero temperature is the interesting
# case; the bulk combination stays positive anyway
nu = cs.lam(theta) + 2.0 * cs.mu(theta)
print("  nu    :", nu, "(lam + 2 mu, must stay positive)")

print()
print("renormalizer families")
for family, kw in [
    ("shifted_reciprocal", {"xi": 1.0}),
    ("shifted_reciprocal", {"xi": 0.1}),
    ("truncated_reciprocal", {"omega": 1e-2, "cutoff": 1.0}),
    ("power_decay", {"l": 0.5}),
    ("constant", {"value": 1.0}),
    ("table", {"h": lambda z: np.exp(-np.asarray(z, float))}),
]:
    r = make_renormalizer(family, **kw)
    tag = "admissible" if r.admissible else "rejected: " + "; ".join(r.failed_conditions)
    args = ", ".join(f"{k}={v}" if not callable(v) else f"{k}=exp(-z)" for k, v in kw.items())
    print(f"  {family:22s} ({args:24s}) {tag}")

# the equality case: h = 1/(1+z) sits exactly on the curvature boundary
r = make_renormalizer("shifted_reciprocal", xi=1.0)
zs = np.linspace(0.0, 50.0, 200)
print()
print("curvature margin of h = 1/(1+z):", float(np.max(np.abs(r.curvature_gap(zs)))))
