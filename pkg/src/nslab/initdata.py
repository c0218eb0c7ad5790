"""Initial data and its delta-dependent regularization.

`regularize_initial_data` mollifies the raw density and temperature,
lifts the density by its sup-norm mollification deficit (so the
regularized density never undershoots the original), clamps both fields
into their admissible bands, and zeroes the momentum wherever the
density clamp pushed below the original.  The mollification radius
shrinks like sqrt(delta), so the regularized data converge back to the
raw data as delta -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .grids import ScalarField, VectorField


@dataclass
class InitialData:
    rho: ScalarField
    momentum: VectorField
    theta: ScalarField

    def __post_init__(self):
        if self.rho.grid != self.momentum.grid or self.rho.grid != self.theta.grid:
            raise ValueError("initial data fields must share one grid")
        if np.any(self.rho.data < 0):
            raise ValueError("initial density must be nonnegative")
        if np.any(self.theta.data < 0):
            raise ValueError("initial temperature must be nonnegative")

    @property
    def grid(self):
        return self.rho.grid


def mollify(values, sigma_cells):
    """Gaussian smoothing with mirror boundaries (mass preserving)."""
    if sigma_cells <= 0.0:
        return np.asarray(values, float).copy()
    return gaussian_filter(np.asarray(values, float), sigma=sigma_cells, mode="reflect")


_SIGMA_REF_DELTA = 0.1


def mollification_sigma(delta, sigma0=2.0):
    """Mollification radius in cells; shrinks like sqrt(delta)."""
    if delta <= 0.0:
        return 0.0
    return sigma0 * np.sqrt(delta / _SIGMA_REF_DELTA)


def regularize_initial_data(data, delta, beta, theta_floor, theta_ceil=None, sigma0=2.0):
    """Produce the delta-regularized initial fields.

    Density band: [delta, delta^(-1/(2*beta))].  The mollified density is
    lifted by its largest undershoot so the set {regularized < original}
    stays empty away from the upper clamp.  Temperature band:
    [theta_floor, theta_ceil]; theta_ceil defaults to 1.01 * max(theta0).
    Momentum is kept where the density was not pushed below the original
    and zeroed elsewhere.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if beta <= 1.0:
        raise ValueError("beta must exceed 1")
    if delta >= delta ** (-1.0 / (2.0 * beta)):
        raise ValueError("empty clamp band: delta >= delta^(-1/(2 beta))")
    if theta_floor <= 0.0:
        raise ValueError("theta_floor must be positive")

    grid = data.grid
    rho0 = data.rho.data
    theta0 = data.theta.data
    if theta_ceil is None:
        theta_ceil = 1.01 * float(np.max(theta0))
    if theta_ceil < theta_floor:
        raise ValueError("theta_ceil below theta_floor")

    sigma = mollification_sigma(delta, sigma0)
    rho_s = mollify(rho0, sigma)
    lift = max(0.0, float(np.max(rho0 - rho_s)))
    rho_hi = delta ** (-1.0 / (2.0 * beta))
    rho_reg = np.clip(rho_s + lift, delta, rho_hi)

    theta_reg = np.clip(mollify(theta0, sigma), theta_floor, theta_ceil)

    keep = rho_reg >= rho0
    mom = data.momentum.data * keep[None, ...]

    return InitialData(
        ScalarField(grid, rho_reg),
        VectorField(grid, mom),
        ScalarField(grid, theta_reg),
    )


def initial_energy(cs, data, delta, beta):
    """Total starting energy of regularized data.

    Kinetic |m|^2/(2 rho) (zero where rho = 0), elastic rho*P_e(rho),
    artificial pressure delta/(beta-1)*rho^beta, and thermal rho*theta.
    """
    from .constitutive import elastic_energy_density

    grid = data.grid
    rho = data.rho.data
    m2 = np.sum(data.momentum.data**2, axis=0)
    kinetic = np.where(rho > 0.0, m2 / (2.0 * np.maximum(rho, 1e-300)), 0.0)
    if np.any((rho <= 0.0) & (m2 > 0.0)):
        raise ValueError("momentum on vacuum cells has infinite kinetic energy")
    elastic = elastic_energy_density(cs, rho)
    artificial = delta / (beta - 1.0) * rho**beta
    thermal = rho * data.theta.data
    total = np.sum(kinetic + elastic + artificial + thermal) * grid.cell_volume
    return float(total)


# ---------------------------------------------------------------------------
# stock profiles

def _gaussian(x, center, width):
    return np.exp(-(((x - center) / width) ** 2))


def make_initial_data(grid, preset="uniform", rho_base=1.0, rho_amp=0.0,
                      theta_base=1.0, theta_amp=0.0, u_amp=0.0,
                      bump_center=0.5, bump_width=0.1):
    """Build raw (unregularized) initial fields from a named profile.

    Presets: 'uniform', 'gaussian-bump' (density bump), 'two-bump'
    (two density bumps), 'shear' (velocity profile over uniform density),
    'mixing' (two-bump density plus shear velocity).  Amplitudes are
    relative to the base values.  Velocity profiles vanish at the walls.
    """
    axes = grid.meshgrid()
    xh = axes[0] / grid.extents[0]
    Lx = grid.extents[0]

    rho = np.full(grid.shape, float(rho_base))
    theta = np.full(grid.shape, float(theta_base))
    vel = np.zeros((grid.dimension,) + grid.shape)

    def add_theta_bump():
        if theta_amp:
            theta_local = theta_amp * _gaussian(axes[0], bump_center * Lx, bump_width * Lx)
            if grid.dimension == 2:
                theta_local = theta_local * _gaussian(axes[1], 0.5 * grid.extents[1], bump_width * grid.extents[1])
            np.add(theta, theta_local, out=theta)

    if preset in ("uniform", "constant"):
        pass
    elif preset == "gaussian-bump":
        bump = rho_amp * _gaussian(axes[0], bump_center * Lx, bump_width * Lx)
        if grid.dimension == 2:
            bump = bump * _gaussian(axes[1], 0.5 * grid.extents[1], bump_width * grid.extents[1])
        rho = rho + bump
    elif preset == "two-bump":
        b1 = _gaussian(axes[0], 0.3 * Lx, bump_width * Lx)
        b2 = _gaussian(axes[0], 0.7 * Lx, bump_width * Lx)
        bump = rho_amp * (b1 + b2)
        if grid.dimension == 2:
            bump = bump * (0.5 + 0.5 * _gaussian(axes[1], 0.5 * grid.extents[1], 2 * bump_width * grid.extents[1]))
        rho = rho + bump
    elif preset == "shear":
        vel[0] = u_amp * np.sin(np.pi * xh)
        if grid.dimension == 2:
            vel[1] = -0.5 * u_amp * np.sin(np.pi * axes[1] / grid.extents[1])
    elif preset == "mixing":
        b1 = _gaussian(axes[0], 0.3 * Lx, bump_width * Lx)
        b2 = _gaussian(axes[0], 0.7 * Lx, bump_width * Lx)
        rho = rho + rho_amp * (b1 + b2)
        vel[0] = u_amp * np.sin(2.0 * np.pi * xh)
        if grid.dimension == 2:
            vel[1] = 0.5 * u_amp * np.sin(np.pi * axes[1] / grid.extents[1])
    else:
        raise KeyError(f"unknown initial preset {preset!r}")

    add_theta_bump()
    momentum = vel * rho[None, ...]
    return InitialData(
        ScalarField(grid, rho),
        VectorField(grid, momentum),
        ScalarField(grid, theta),
    )
