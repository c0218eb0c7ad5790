#!/usr/bin/env python
"""Discrete operator sanity on the staggered-free cell grid."""

import numpy as np

from nslab.diagnostics import poincare_batch
from nslab.grids import (
    NEUMANN,
    GridSpec,
    ScalarField,
    VectorField,
    div,
    grad,
    inner,
    integrate,
    laplacian,
    scalar_field,
)

g = GridSpec((1.0,), (64,))
x = g.axes()[0]

f = ScalarField(g, np.cos(np.pi * x))
v = VectorField(g, np.sin(np.pi * x)[None, :] * 0.3)

lhs = inner(ScalarField(g, grad(f).data[0]), ScalarField(g, v.data[0]))
rhs = inner(f, div(v))
print("summation by parts <grad f, v> + <f, div v> =", lhs + rhs)
print("divergence theorem  integral of div v       =", integrate(div(v)))

print()
print("Neumann Laplacian convergence on cos(pi x)")
errs = []
for n in (32, 64, 128, 256):
    gg = GridSpec((1.0,), (n,))
    xx = gg.axes()[0]
    ff = scalar_field(gg, np.cos(np.pi * xx))
    exact = -np.pi**2 * np.cos(np.pi * xx)
    errs.append(np.max(np.abs(laplacian(ff, NEUMANN).data - exact)))
    line = f"  n={n:4d}  err={errs[-1]:.3e}"
    if len(errs) > 1:
        line += f"  order={np.log2(errs[-2] / errs[-1]):.2f}"
    print(line)

print()
print("density-weighted Poincare constant, empirical")
for seed in (1, 2, 3):
    batch = poincare_batch(g, gamma=2.0, M1=1.0, M2=3.0, n_samples=500, seed=seed)
    print(f"  seed={seed}  sup ratio over 500 samples = {batch.sup_ratio:.4f}")
