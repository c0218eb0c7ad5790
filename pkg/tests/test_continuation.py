import json
import math

import numpy as np
import pytest

from nslab.constitutive import LINEAR_IN_DENSITY, power_law_set
from nslab.continuation import (
    ESTIMATE_KEYS,
    LevelResult,
    SweepReport,
    cutoff_Tk,
    density_step,
    low_density_weight,
    parameter_sweep,
    temperature_integrability_probe,
)
from nslab.grids import (
    GridSpec,
    integrate_values,
    neumann_laplacian_matrix,
    scalar_field,
    vector_field,
)
from nslab.initdata import InitialData, make_initial_data
from nslab.solver import (
    EnergyLedger,
    FluidState,
    RegularizationParams,
    Trajectory,
)


def quadratic_set(**kw):
    base = dict(
        kind=LINEAR_IN_DENSITY, gamma=2.0, pe_coeff=1.0, R=1.0,
        mu0=0.1, mu1=1.0, lam0=0.0, lam1=0.0, kappa0=1.0,
    )
    base.update(kw)
    return power_law_set(**base)


def make_traj(grid, cs, params, times, states, dt=0.01):
    return Trajectory(grid, cs, params, dt, list(times), list(states), EnergyLedger(), {})


def uniform_state(grid, rho, u, theta, t=0.0):
    return FluidState(
        scalar_field(grid, rho),
        vector_field(grid, *([u] * grid.dimension)),
        scalar_field(grid, theta),
        t,
    )


class TestCutoff:
    def test_pointwise_values(self):
        grid = GridSpec((1.0,), (8,))
        rho = scalar_field(grid, np.resize([0.5, 3.0, 7.0], 8))
        cut = cutoff_Tk(rho, 2)
        expected = np.resize([0.5, 2.0, 2.0], 8)
        assert np.array_equal(cut.data, expected)

    def test_identity_above_max(self):
        grid = GridSpec((1.0,), (16,))
        rho = scalar_field(grid, 1.0 + 0.5 * np.sin(np.linspace(0, 6, 16)))
        cut = cutoff_Tk(rho, 5.0)
        assert np.array_equal(cut.data, rho.data)

    def test_mass_monotone_in_level(self):
        grid = GridSpec((1.0,), (64,))
        rng = np.random.default_rng(7)
        rho = scalar_field(grid, rng.uniform(0.0, 8.0, 64))
        masses = [
            integrate_values(grid, cutoff_Tk(rho, k).data) for k in (1, 2, 5)
        ]
        total = integrate_values(grid, rho.data)
        assert masses[0] <= masses[1] <= masses[2] <= total

    def test_rejects_small_level(self):
        grid = GridSpec((1.0,), (8,))
        rho = scalar_field(grid, np.ones(8))
        with pytest.raises(ValueError):
            cutoff_Tk(rho, 0.5)
        with pytest.raises(TypeError):
            cutoff_Tk(np.ones(8), 2.0)


class TestDensityStep:
    def test_plateau_values(self):
        w = 0.25
        z = np.array([0.0, w, 1.5 * w, 2.0 * w, 10.0])
        b = density_step(z, w)
        assert b[0] == 0.0 and b[1] == 0.0
        assert b[3] == -1.0 and b[4] == -1.0
        assert math.isclose(b[2], -0.5, rel_tol=1e-14)

    def test_monotone_and_c1(self):
        w = 0.1
        z = np.linspace(0.0, 0.4, 4001)
        b = density_step(z, w)
        assert np.all(np.diff(b) <= 1e-15)
        # cubic blend: junction slopes are tiny next to the midpoint slope
        h = z[1] - z[0]
        i_lo = np.searchsorted(z, w)
        i_hi = np.searchsorted(z, 2 * w)
        peak = np.max(np.abs(np.diff(b))) / h
        assert abs(b[i_lo + 1] - b[i_lo]) / h < 0.01 * peak
        assert abs(b[i_hi] - b[i_hi - 1]) / h < 0.01 * peak

    def test_rejects_bad_threshold(self):
        with pytest.raises(ValueError):
            density_step(np.ones(4), 0.0)


class TestLowDensityWeight:
    def test_zero_when_step_constant(self):
        grid = GridSpec((1.0,), (32,))
        high = scalar_field(grid, np.full(32, 1.0))    # all above 2*omega
        low = scalar_field(grid, np.full(32, 0.001))   # all below omega
        for rho in (high, low):
            w = low_density_weight(rho, 0.01)
            assert np.max(np.abs(w.data)) <= 1e-12

    def test_mixed_field_solve_quality(self):
        grid = GridSpec((1.0,), (128,))
        x = grid.axes()[0]
        rho = scalar_field(grid, 0.05 + 0.5 * (1 + np.tanh((x - 0.5) / 0.05)))
        omega = 0.1
        w = low_density_weight(rho, omega)

        assert abs(integrate_values(grid, w.data)) <= 1e-13
        lap = neumann_laplacian_matrix(grid)
        b = density_step(rho.data, omega)
        rhs = b - integrate_values(grid, b) / 1.0
        residual = lap @ w.data.ravel() - rhs.ravel()
        assert np.max(np.abs(residual)) <= 1e-10
        # compatible with the no-flux walls: total laplacian mass vanishes
        assert abs(np.sum(lap @ w.data.ravel()) * grid.cell_volume) <= 1e-12

    def test_2d_blob(self):
        grid = GridSpec((1.0, 1.0), (24, 24))
        X, Y = grid.meshgrid()
        rho = scalar_field(grid, 0.02 + np.exp(-((X - 0.5) ** 2 + (Y - 0.5) ** 2) / 0.02))
        w = low_density_weight(rho, 0.05)
        assert abs(integrate_values(grid, w.data)) <= 1e-12
        assert np.max(np.abs(w.data)) > 0.0
        assert w.data.shape == (24, 24)

    def test_rejects_non_field(self):
        with pytest.raises(TypeError):
            low_density_weight(np.ones(16), 0.1)


class TestIntegrabilityProbe:
    def test_all_high_density(self):
        grid = GridSpec((1.0,), (32,))
        cs = quadratic_set()
        params = RegularizationParams(0.01, 0.01, 0.1, 2.0)
        states = [uniform_state(grid, 1.0, 0.0, 0.7, t) for t in (0.0, 0.5, 1.0)]
        traj = make_traj(grid, cs, params, [0.0, 0.5, 1.0], states)
        hi, lo = temperature_integrability_probe(traj, 0.5)
        assert lo == 0.0
        assert math.isclose(hi, 0.7**3 * 1.0, rel_tol=1e-12)

    def test_split_proportional_to_volumes(self):
        grid = GridSpec((1.0,), (40,))
        cs = quadratic_set()
        params = RegularizationParams(0.01, 0.01, 0.1, 2.0)
        rho = np.where(grid.axes()[0] < 0.3, 0.01, 2.0)  # 12 low cells of 40
        theta = np.full(40, 0.6)
        states = [
            FluidState(
                scalar_field(grid, rho),
                vector_field(grid, np.zeros(40)),
                scalar_field(grid, theta),
                t,
            )
            for t in (0.0, 2.0)
        ]
        traj = make_traj(grid, cs, params, [0.0, 2.0], states)
        hi, lo = temperature_integrability_probe(traj, 0.05)
        cube = 0.6**3
        assert math.isclose(hi, cube * (28 / 40) * 2.0, rel_tol=1e-12)
        assert math.isclose(lo, cube * (12 / 40) * 2.0, rel_tol=1e-12)

    def test_single_snapshot_is_zero(self):
        grid = GridSpec((1.0,), (16,))
        cs = quadratic_set()
        params = RegularizationParams(0.01, 0.01, 0.1, 2.0)
        traj = make_traj(grid, cs, params, [0.0], [uniform_state(grid, 1.0, 0.0, 1.0)])
        assert temperature_integrability_probe(traj, 0.1) == (0.0, 0.0)

    def test_rejects_bad_threshold(self):
        grid = GridSpec((1.0,), (16,))
        cs = quadratic_set()
        params = RegularizationParams(0.01, 0.01, 0.1, 2.0)
        traj = make_traj(grid, cs, params, [0.0], [uniform_state(grid, 1.0, 0.0, 1.0)])
        with pytest.raises(ValueError):
            temperature_integrability_probe(traj, 0.0)


class TestParameterSweep:
    def test_stationary_levels_are_identical(self):
        # delta = 0 removes the sink, so uniform rest data never moves and
        # every eta level produces the same history
        grid = GridSpec((1.0,), (32,))
        init = make_initial_data(grid, "uniform", rho_base=1.0, theta_base=1.0)
        cs = quadratic_set()
        base = RegularizationParams(0.01, 0.1, 0.0, 2.0)
        rep = parameter_sweep(
            cs, init, base, dt=2e-3, t_end=0.02, param="eta",
            schedule=(1e-1, 1e-2, 1e-3), snapshot_stride=2,
        )
        assert all(lvl.ok for lvl in rep.levels)
        assert rep.density_gaps == (0.0, 0.0)
        assert all(all(g == 0.0 for g in v) for v in rep.pairing_gaps.values())
        assert rep.density_converging and rep.pairings_converging
        assert rep.verdict == "converged"
        assert rep.estimates_bounded
        assert len(set(rep.min_thetas)) == 1
        for lvl in rep.levels:
            assert set(lvl.estimates) == set(ESTIMATE_KEYS)
            assert all(math.isfinite(x) for x in lvl.estimates.values())
            assert len(lvl.pairings) == 12

    def test_epsilon_sweep_contracts(self):
        grid = GridSpec((1.0,), (48,))
        init = make_initial_data(
            grid, "mixing", rho_base=1.0, rho_amp=0.25, theta_base=0.8, u_amp=0.15
        )
        cs = quadratic_set()
        base = RegularizationParams(0.1, 0.01, 0.05, 2.0)
        rep = parameter_sweep(
            cs, init, base, dt=1e-3, t_end=0.05, param="epsilon",
            schedule=(1e-1, 1e-2, 1e-3), snapshot_stride=5,
        )
        assert all(lvl.ok for lvl in rep.levels)
        # differences shrink roughly linearly with the epsilon decrement
        assert rep.density_gaps[1] < rep.density_gaps[0]
        assert rep.density_converging
        assert rep.verdict == "converged"
        assert all(t > 0.0 for t in rep.min_thetas)
        for lvl in rep.levels:
            hi, lo = lvl.theta_cubed_split
            assert hi > 0.0 and lo >= 0.0

    def test_failed_level_is_recorded(self):
        grid = GridSpec((1.0,), (32,))
        init = make_initial_data(grid, "uniform", rho_base=1.0, theta_base=1.0)
        cs = quadratic_set()
        base = RegularizationParams(0.01, 0.01, 0.1, 2.0)
        # delta = 2.0 is out of range and must fail without killing the sweep
        rep = parameter_sweep(
            cs, init, base, dt=2e-3, t_end=0.01, param="delta",
            schedule=(2.0, 0.5, 0.1), snapshot_stride=2,
        )
        assert not rep.levels[0].ok
        assert "delta" in rep.levels[0].error
        assert rep.levels[1].ok and rep.levels[2].ok
        assert len(rep.density_gaps) == 1
        assert rep.verdict == "not yet converged"
        assert any("failed" in n for n in rep.notes)
        assert any("fewer than three" in n for n in rep.notes)

    def test_validation(self):
        grid = GridSpec((1.0,), (16,))
        init = make_initial_data(grid, "uniform")
        cs = quadratic_set()
        base = RegularizationParams(0.01, 0.01, 0.1, 2.0)
        with pytest.raises(ValueError, match="param"):
            parameter_sweep(cs, init, base, 1e-3, 0.01, "beta")
        with pytest.raises(ValueError, match="3 levels"):
            parameter_sweep(cs, init, base, 1e-3, 0.01, "eta", schedule=(0.1, 0.01))
        with pytest.raises(ValueError, match="decreasing"):
            parameter_sweep(
                cs, init, base, 1e-3, 0.01, "eta", schedule=(0.1, 0.1, 0.01)
            )
        with pytest.raises(ValueError, match="nonnegative"):
            parameter_sweep(
                cs, init, base, 1e-3, 0.01, "eta", schedule=(0.1, 0.01, -1.0)
            )
        with pytest.raises(ValueError, match="power_l"):
            parameter_sweep(
                cs, init, base, 1e-3, 0.01, "eta",
                schedule=(0.1, 0.01, 0.001), power_l=1.0,
            )

    def test_report_serializes(self):
        grid = GridSpec((1.0,), (32,))
        init = make_initial_data(grid, "uniform", rho_base=1.0, theta_base=1.0)
        cs = quadratic_set()
        base = RegularizationParams(0.01, 0.1, 0.0, 2.0)
        rep = parameter_sweep(
            cs, init, base, dt=2e-3, t_end=0.01, param="eta",
            schedule=(1e-1, 1e-2, 1e-3), snapshot_stride=2,
        )
        d = rep.to_dict()
        text = json.dumps(d, sort_keys=True)
        back = json.loads(text)
        assert back["param"] == "eta"
        assert back["verdict"] == rep.verdict
        assert len(back["levels"]) == 3
        assert back["levels"][0]["estimates"]["sup_thermal_mass"] > 0.0
