import numpy as np
import pytest

from nslab.constitutive import LINEAR_IN_DENSITY, power_law_set, preset_set
from nslab.grids import GridSpec, ScalarField, VectorField, scalar_field, vector_field
from nslab.initdata import (
    InitialData,
    initial_energy,
    make_initial_data,
    mollification_sigma,
    mollify,
    regularize_initial_data,
)


def quadratic_set():
    return power_law_set(
        kind=LINEAR_IN_DENSITY, gamma=2.0, pe_coeff=1.0, R=1.0,
        mu0=0.1, mu1=1.0, lam0=0.0, lam1=0.0, kappa0=1.0,
    )


def uniform_data(grid, rho=1.0, theta=1.0):
    return InitialData(
        scalar_field(grid, rho),
        vector_field(grid, *([0.0] * grid.dimension)),
        scalar_field(grid, theta),
    )


def bump_data(grid, peak=2.0):
    x = grid.axes()[0]
    rho = 1.0 + (peak - 1.0) * np.exp(-0.5 * ((x - 0.5) / 0.08) ** 2)
    return InitialData(
        ScalarField(grid, rho),
        vector_field(grid, 0.0),
        scalar_field(grid, 1.0),
    )


G1 = GridSpec((1.0,), (128,))


class TestRegularize:
    def test_uniform_density_untouched(self):
        data = uniform_data(G1)
        reg = regularize_initial_data(data, delta=0.01, beta=5.0, theta_floor=0.5)
        assert np.array_equal(reg.rho.data, data.rho.data)

    def test_uniform_theta_at_floor(self):
        data = uniform_data(G1, theta=0.5)
        reg = regularize_initial_data(
            data, delta=0.01, beta=5.0, theta_floor=0.5, theta_ceil=2.0
        )
        assert np.array_equal(reg.theta.data, data.theta.data)

    def test_clamp_bounds_exact(self):
        grid = GridSpec((1.0,), (256,))
        data = bump_data(grid, peak=3.0)
        for delta in (0.1, 0.01):
            reg = regularize_initial_data(data, delta=delta, beta=5.0, theta_floor=0.5)
            hi = delta ** (-1.0 / 10.0)
            assert np.min(reg.rho.data) >= delta
            assert np.max(reg.rho.data) <= hi

    def test_theta_band_exact(self):
        rng = np.random.default_rng(0)
        theta0 = 1.0 + 0.5 * np.sin(2 * np.pi * G1.axes()[0]) + 0.05 * rng.normal(size=128)
        data = InitialData(
            scalar_field(G1, 1.0), vector_field(G1, 0.0), ScalarField(G1, np.abs(theta0))
        )
        reg = regularize_initial_data(
            data, delta=0.05, beta=5.0, theta_floor=0.6, theta_ceil=1.2
        )
        assert np.min(reg.theta.data) >= 0.6
        assert np.max(reg.theta.data) <= 1.2

    def test_undershoot_measure_shrinks_with_delta(self):
        grid = GridSpec((1.0,), (512,))
        data = bump_data(grid, peak=2.0)
        frac = []
        for delta in (1e-1, 1e-2, 1e-3):
            reg = regularize_initial_data(data, delta=delta, beta=5.0, theta_floor=0.5)
            frac.append(float(np.mean(reg.rho.data < data.rho.data)))
        assert frac[0] > frac[1] > frac[2]
        assert frac[2] < 0.02

    def test_momentum_selector_cellwise(self):
        grid = GridSpec((1.0,), (256,))
        data = bump_data(grid, peak=3.0)
        m0 = np.sin(2 * np.pi * grid.axes()[0])
        data = InitialData(data.rho, VectorField(grid, m0[None, :]), data.theta)
        reg = regularize_initial_data(data, delta=0.1, beta=5.0, theta_floor=0.5)
        kept = reg.rho.data >= data.rho.data
        assert np.array_equal(reg.momentum.data[0][kept], m0[kept])
        assert np.all(reg.momentum.data[0][~kept] == 0.0)

    def test_delta_range_rejected(self):
        data = uniform_data(G1)
        for delta in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                regularize_initial_data(data, delta=delta, beta=5.0, theta_floor=0.5)

    def test_beta_rejected(self):
        with pytest.raises(ValueError):
            regularize_initial_data(uniform_data(G1), delta=0.1, beta=1.0, theta_floor=0.5)

    def test_default_ceiling_tracks_data(self):
        data = uniform_data(G1, theta=2.0)
        reg = regularize_initial_data(data, delta=0.1, beta=5.0, theta_floor=0.5)
        assert np.max(reg.theta.data) <= 2.0 * 1.01 + 1e-14


class TestMollify:
    def test_zero_radius_is_identity(self):
        rng = np.random.default_rng(4)
        f = rng.normal(size=G1.shape)
        assert np.array_equal(mollify(f, 0.0), f)

    def test_l1_convergence_order(self):
        grid = GridSpec((1.0,), (1024,))
        x = grid.axes()[0]
        f = np.sin(2 * np.pi * x) + 0.3 * np.cos(6 * np.pi * x)
        errs = [
            np.mean(np.abs(mollify(f, s) - f)) for s in (8.0, 4.0, 2.0, 1.0)
        ]
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(3)]
        assert min(orders) >= 1.0

    def test_sigma_schedule(self):
        assert mollification_sigma(0.1) == pytest.approx(2.0)
        assert mollification_sigma(0.025) == pytest.approx(1.0)
        assert mollification_sigma(0.0) == 0.0


class TestInitialEnergy:
    def test_frozen_uniform_value(self):
        cs = quadratic_set()
        data = uniform_data(G1, rho=1.0, theta=1.0)
        E = initial_energy(cs, data, delta=0.1, beta=5.0)
        assert E == pytest.approx(1.025, abs=1e-12)

    def test_zero_temperature_limit_form(self):
        cs = quadratic_set()
        grid = GridSpec((1.0,), (128,))
        rho = 1.0 + 0.2 * np.sin(2 * np.pi * grid.axes()[0])
        data = InitialData(
            ScalarField(grid, rho), vector_field(grid, 0.0), scalar_field(grid, 0.0)
        )
        delta, beta = 0.1, 5.0
        E = initial_energy(cs, data, delta=delta, beta=beta)
        dx = grid.cell_volume
        expected = float(
            np.sum(delta / (beta - 1.0) * rho**beta + rho * (rho - 1.0)) * dx
        )
        assert E == pytest.approx(expected, rel=1e-10)

    def test_kinetic_term(self):
        cs = quadratic_set()
        grid = GridSpec((1.0,), (128,))
        m = np.full(grid.shape, 0.6)
        data = InitialData(
            scalar_field(grid, 2.0), VectorField(grid, m[None, :]), scalar_field(grid, 1.0)
        )
        E = initial_energy(cs, data, delta=0.0, beta=5.0)
        no_kin = initial_energy(
            cs,
            InitialData(data.rho, vector_field(grid, 0.0), data.theta),
            delta=0.0,
            beta=5.0,
        )
        assert E - no_kin == pytest.approx(0.6**2 / (2 * 2.0), rel=1e-12)

    def test_momentum_on_vacuum_rejected(self):
        cs = quadratic_set()
        grid = GridSpec((1.0,), (128,))
        rho = np.ones(grid.shape)
        rho[10] = 0.0
        m = np.ones(grid.shape)
        data = InitialData(
            ScalarField(grid, rho), VectorField(grid, m[None, :]), scalar_field(grid, 1.0)
        )
        with pytest.raises(ValueError):
            initial_energy(cs, data, delta=0.1, beta=5.0)

    def test_bounded_over_delta_schedule(self):
        cs = preset_set("ideal-like")
        grid = GridSpec((1.0,), (256,))
        raw = bump_data(grid, peak=1.2)
        energies = []
        for delta in (1e-1, 1e-2, 1e-3, 1e-4):
            reg = regularize_initial_data(raw, delta=delta, beta=5.0, theta_floor=0.5)
            energies.append(initial_energy(cs, reg, delta=delta, beta=5.0))
        assert max(energies) / min(energies) <= 1.05


class TestPresets:
    def test_preset_names(self):
        for name in ("uniform", "constant", "gaussian-bump", "two-bump", "shear", "mixing"):
            data = make_initial_data(
                G1, name, rho_base=1.0, rho_amp=0.2, theta_base=1.0, theta_amp=0.0,
                u_amp=0.1,
            )
            assert np.min(data.rho.data) > 0.0
            assert np.min(data.theta.data) > 0.0

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            make_initial_data(G1, "vortex", rho_base=1.0, rho_amp=0.0,
                              theta_base=1.0, theta_amp=0.0, u_amp=0.0)

    def test_momentum_is_density_weighted(self):
        data = make_initial_data(
            G1, "shear", rho_base=1.0, rho_amp=0.3, theta_base=1.0, theta_amp=0.0,
            u_amp=0.2,
        )
        u = data.momentum.data[0] / data.rho.data
        x = G1.axes()[0]
        assert np.allclose(u, 0.2 * np.sin(np.pi * x), atol=1e-12)

    def test_two_bump_has_two_maxima(self):
        data = make_initial_data(
            G1, "two-bump", rho_base=1.0, rho_amp=0.5, theta_base=1.0, theta_amp=0.0,
            u_amp=0.0,
        )
        rho = data.rho.data
        interior_max = (rho[1:-1] > rho[:-2]) & (rho[1:-1] > rho[2:])
        assert int(np.sum(interior_max)) == 2
