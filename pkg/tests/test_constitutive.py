import math

import numpy as np
import pytest

from nslab.constitutive import (
    ConstitutiveSet,
    GENERAL_SPLIT,
    LINEAR_IN_DENSITY,
    elastic_energy_density,
    elastic_potential,
    kappa_primitive,
    make_renormalizer,
    pe_decomposition,
    power_law_set,
    preset_set,
    validate_hypotheses,
)


def quadratic_linear_set():
    # p_e = rho^2, thermal part R*rho*theta with R = 1
    return power_law_set(
        kind=LINEAR_IN_DENSITY, gamma=2.0, pe_coeff=1.0, R=1.0,
        mu0=0.1, mu1=1.0, lam0=0.0, lam1=0.0, kappa0=1.0,
    )


class TestPressure:
    def test_linear_in_density_value(self):
        cs = quadratic_linear_set()
        assert cs.pressure(2.0, 3.0) == pytest.approx(10.0, abs=1e-14)

    def test_vacuum_pressure_is_zero(self):
        for name in ("ideal-like", "degenerate", "general-split"):
            cs = preset_set(name)
            assert cs.pressure(0.0, 1.7) == pytest.approx(0.0, abs=1e-14)

    def test_general_split_value(self):
        cs = ConstitutiveSet(
            kind=GENERAL_SPLIT,
            gamma=2.0,
            p_e=lambda r: np.asarray(r, float) ** 2,
            p_th=lambda r: np.sqrt(np.asarray(r, float)),
            mu=lambda t: 0.1 + np.asarray(t, float),
            lam=lambda t: np.zeros_like(np.asarray(t, float)),
            kappa=lambda t: 1.0 + np.asarray(t, float) ** 2,
        )
        assert cs.pressure(4.0, 1.0) == pytest.approx(18.0, abs=1e-13)

    def test_monotone_in_temperature(self):
        rng = np.random.default_rng(3)
        cs = preset_set("ideal-like")
        for _ in range(50):
            rho = rng.uniform(0.0, 5.0)
            t1 = rng.uniform(0.0, 5.0)
            t2 = t1 + rng.uniform(0.0, 5.0)
            assert cs.pressure(rho, t2) >= cs.pressure(rho, t1) - 1e-14

    def test_negative_inputs_rejected(self):
        cs = preset_set("ideal-like")
        with pytest.raises(ValueError):
            cs.pressure(-1.0, 1.0)
        with pytest.raises(ValueError):
            cs.pressure(1.0, -0.5)


class TestKappaPrimitive:
    def test_quadratic_value(self):
        cs = preset_set("ideal-like")  # kappa = 1 + theta^2
        assert kappa_primitive(cs, 2.0) == pytest.approx(14.0 / 3.0, abs=1e-12)

    def test_zero(self):
        cs = preset_set("ideal-like")
        assert kappa_primitive(cs, 0.0) == 0.0

    def test_scaled_quadratic(self):
        cs = power_law_set(
            kind=LINEAR_IN_DENSITY, gamma=4.0, pe_coeff=1.0, R=1.0,
            mu0=0.1, mu1=1.0, lam0=0.0, lam1=0.0, kappa0=2.0,
        )
        assert kappa_primitive(cs, 1.0) == pytest.approx(8.0 / 3.0, abs=1e-12)

    def test_quadrature_path_matches_analytic(self):
        # same kappa but without the polynomial shortcut
        cs = ConstitutiveSet(
            kind=LINEAR_IN_DENSITY,
            gamma=4.0,
            p_e=lambda r: np.asarray(r, float) ** 4,
            p_th=None,
            R=1.0,
            mu=lambda t: 0.1 + np.asarray(t, float),
            lam=lambda t: np.zeros_like(np.asarray(t, float)),
            kappa=lambda t: 1.0 + np.asarray(t, float) ** 2,
        )
        assert cs.kappa_poly is None
        got = kappa_primitive(cs, np.array([0.5, 2.0, 7.0]))
        want = np.array([0.5 + 0.5**3 / 3, 14.0 / 3.0, 7.0 + 7.0**3 / 3])
        assert np.max(np.abs(got - want) / want) <= 1e-10

    def test_monotone_and_envelope(self):
        cs = preset_set("degenerate")
        th = np.linspace(0.0, 10.0, 200)
        K = kappa_primitive(cs, th)
        assert np.all(np.diff(K) > 0.0)
        lower = cs.kappa_lo * (th + th**3 / 3.0)
        upper = cs.kappa_hi * (th + th**3 / 3.0)
        assert np.all(K >= lower - 1e-12)
        assert np.all(K <= upper + 1e-12)


class TestElasticPotential:
    def test_quadratic_values(self):
        cs = quadratic_linear_set()  # p_e = rho^2 so P_e = rho - 1
        assert elastic_potential(cs, 2.0) == pytest.approx(1.0, abs=1e-12)
        assert elastic_potential(cs, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert elastic_potential(cs, 0.5) == pytest.approx(-0.5, abs=1e-12)

    def test_sign_matches_density_offset(self):
        cs = preset_set("ideal-like")
        assert elastic_potential(cs, 1.5) > 0.0
        assert elastic_potential(cs, 0.7) < 0.0

    def test_against_midpoint_rule(self):
        # force the quadrature path with a non-power law
        cs = ConstitutiveSet(
            kind=LINEAR_IN_DENSITY,
            gamma=4.0,
            p_e=lambda r: np.asarray(r, float) ** 4 + 0.1 * np.asarray(r, float),
            p_th=None,
            R=1.0,
            mu=lambda t: 0.1 + np.asarray(t, float),
            lam=lambda t: np.zeros_like(np.asarray(t, float)),
            kappa=lambda t: 1.0 + np.asarray(t, float) ** 2,
        )
        rng = np.random.default_rng(12)
        for rho in rng.uniform(0.1, 10.0, size=100):
            n = 100_000
            z = np.linspace(1.0, rho, n + 1)
            mid = 0.5 * (z[:-1] + z[1:])
            brute = float(np.sum(cs.p_e(mid) / mid**2) * (rho - 1.0) / n)
            assert elastic_potential(cs, rho) == pytest.approx(brute, abs=1e-8)

    def test_energy_density_vanishes_at_vacuum(self):
        cs = preset_set("ideal-like")
        vals = elastic_energy_density(cs, np.array([0.0, 1e-12, 1.0]))
        assert vals[0] == 0.0
        assert vals[1] == 0.0
        assert vals[2] == pytest.approx(0.0, abs=1e-12)  # P_e(1) = 0


class TestRenormalizers:
    def test_reciprocal_equality_case(self):
        r = make_renormalizer("shifted_reciprocal", xi=1.0)  # h = 1/(1+z)
        assert r.admissible
        zs = np.linspace(0.0, 50.0, 500)
        gap = r.curvature_gap(zs)
        assert np.max(np.abs(gap)) <= 1e-9

    def test_exponential_fails_curvature(self):
        r = make_renormalizer("table", h=lambda z: np.exp(-np.asarray(z, float)))
        assert not r.admissible
        assert any("curvature" in msg for msg in r.failed_conditions)

    def test_shifted_reciprocal_primitive(self):
        r = make_renormalizer("shifted_reciprocal", xi=0.5)
        assert r.admissible
        assert r.H(0.5) == pytest.approx(0.5 * math.log(2.0), abs=1e-12)
        assert r.H(0.0) == 0.0

    def test_power_family_passes(self):
        for l in (0.25, 0.5, 0.75, 1.0):
            r = make_renormalizer("power_decay", l=l)
            assert r.admissible, (l, r.failed_conditions)

    def test_power_exponent_above_one_rejected(self):
        with pytest.raises(ValueError):
            make_renormalizer("power_decay", l=1.5)

    def test_truncated_family_passes(self):
        r = make_renormalizer("truncated_reciprocal", omega=1e-2, cutoff=1.0)
        assert r.admissible
        # H(z) = log1p(z/omega) on the live branch
        assert r.H(0.5) == pytest.approx(math.log1p(0.5 / 1e-2), rel=1e-10)

    def test_constant_family_flagged(self):
        r = make_renormalizer("constant", value=1.0)
        assert not r.admissible
        assert any("decay" in msg for msg in r.failed_conditions)
        # but the primitive is still the identity scaling
        assert r.H(2.5) == pytest.approx(2.5)

    def test_admissible_table_passes(self):
        r = make_renormalizer("table", h=lambda z: 1.0 / (1.0 + np.asarray(z, float)))
        assert r.admissible, r.failed_conditions

    def test_kh_primitive_against_analytic(self):
        cs = preset_set("ideal-like")  # kappa = 1 + z^2
        r = make_renormalizer("constant", value=2.0, cs=cs)
        # K_h = 2*K = 2*(z + z^3/3)
        z = np.array([0.5, 1.0, 3.0])
        want = 2.0 * (z + z**3 / 3.0)
        assert np.max(np.abs(r.K_h(z) - want) / want) <= 1e-8

    def test_h0_must_be_finite_positive(self):
        r = make_renormalizer("table", h=lambda z: np.zeros_like(np.asarray(z, float)))
        assert not r.admissible


class TestPeDecomposition:
    def test_monotone_pe_gives_zero_bump(self):
        cs = preset_set("ideal-like")
        dec = pe_decomposition(cs)
        assert np.max(np.abs(dec.p_b)) == 0.0
        assert np.max(np.abs(dec.reconstruct() - cs.p_e(dec.rho_grid))) <= 1e-12

    def test_wiggly_pe_decomposes(self):
        cs = ConstitutiveSet(
            kind=LINEAR_IN_DENSITY,
            gamma=4.0,
            p_e=lambda r: np.asarray(r, float) ** 2
            - np.sin(np.pi * np.asarray(r, float)) * (np.asarray(r, float) <= 1.0),
            p_th=None,
            R=1.0,
            mu=lambda t: 0.1 + np.asarray(t, float),
            lam=lambda t: np.zeros_like(np.asarray(t, float)),
            kappa=lambda t: 1.0 + np.asarray(t, float) ** 2,
        )
        dec = pe_decomposition(cs)
        assert np.all(np.diff(dec.p_m) >= -1e-12)
        assert np.all(dec.p_b >= -1e-12)
        assert np.max(np.abs(dec.reconstruct() - cs.p_e(dec.rho_grid))) <= 1e-12
        # the dip lives below rho = 1
        assert dec.support_end <= 1.0 + 1e-6


class TestValidateHypotheses:
    def test_presets_pass(self):
        for name in ("ideal-like", "degenerate", "general-split"):
            rep = validate_hypotheses(preset_set(name), beta=6.0)
            assert rep.all_passed, [c.name for c in rep.failures()]

    def test_beta_rule(self):
        cs = preset_set("general-split")  # gamma = 2
        rep = validate_hypotheses(cs, beta=4.0)
        assert not rep.all_passed
        assert any("beta" in c.name for c in rep.failures())

    def test_gamma_threshold_general_split(self):
        cs = power_law_set(
            kind=GENERAL_SPLIT, gamma=1.4, pe_coeff=1.0, pth_coeff=1.0,
            mu0=0.1, mu1=1.0, lam0=0.0, lam1=0.0, kappa0=1.0,
        )
        rep = validate_hypotheses(cs, beta=6.0)
        assert not rep.all_passed
        assert any("gamma" in c.name for c in rep.failures())

    def test_gamma_threshold_linear(self):
        cs = power_law_set(
            kind=LINEAR_IN_DENSITY, gamma=2.5, pe_coeff=1.0, R=1.0,
            mu0=0.1, mu1=1.0, lam0=0.0, lam1=0.0, kappa0=1.0,
        )
        rep = validate_hypotheses(cs, beta=6.0)
        assert not rep.all_passed

    def test_decreasing_mu_fails(self):
        cs = power_law_set(
            kind=LINEAR_IN_DENSITY, gamma=4.0, pe_coeff=1.0, R=1.0,
            mu0=1.0, mu1=-0.1, lam0=0.0, lam1=0.0, kappa0=1.0,
        )
        rep = validate_hypotheses(cs, beta=6.0)
        assert not rep.all_passed
        assert any("mu" in c.name for c in rep.failures())

    def test_witness_reported(self):
        cs = power_law_set(
            kind=LINEAR_IN_DENSITY, gamma=4.0, pe_coeff=1.0, R=1.0,
            mu0=1.0, mu1=-0.1, lam0=0.0, lam1=0.0, kappa0=1.0,
        )
        rep = validate_hypotheses(cs, beta=6.0)
        bad = [c for c in rep.failures() if "mu" in c.name]
        assert bad and bad[0].witness is not None

    def test_bulk_combination(self):
        # lambda strongly negative breaks lambda + 2mu/3 >= 0
        cs = power_law_set(
            kind=LINEAR_IN_DENSITY, gamma=4.0, pe_coeff=1.0, R=1.0,
            mu0=0.1, mu1=0.5, lam0=-5.0, lam1=0.0, kappa0=1.0,
        )
        rep = validate_hypotheses(cs, beta=6.0)
        assert not rep.all_passed
