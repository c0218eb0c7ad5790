"""Inequality checks and functionals evaluated on discrete trajectories.

Every check reduces a weak (test-function) statement to a finite bank of
smooth test functions and trapezoid time quadrature over the stored
snapshots, reporting signed residuals: a residual at or below its
tolerance means the discrete trajectory satisfies the inequality.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grids
from .grids import NEUMANN, ScalarField, VectorField
from .solver import grad_sq_quadrature, stress_quadrature


@dataclass
class InequalityReport:
    """Signed residual(s) of one inequality check.

    `residual <= tolerance` entrywise means the inequality holds; the
    verdict aggregates that over the whole series.
    """

    name: str
    residual: np.ndarray
    tolerance: np.ndarray
    times: np.ndarray = None
    labels: list = None
    meta: dict = field(default_factory=dict)

    @property
    def violation(self):
        return self.residual - self.tolerance

    @property
    def passed(self):
        return bool(np.all(self.residual <= self.tolerance))

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"

    def __str__(self):
        worst = float(np.max(self.violation))
        return f"{self.name}: {self.verdict} (worst margin {worst:+.3e})"


# ---------------------------------------------------------------------------
# energy

def total_energy(state, cs, delta, beta):
    """Kinetic + elastic + artificial-pressure + thermal energy."""
    from .constitutive import elastic_energy_density

    g = state.grid
    rho = state.rho.data
    kin = 0.5 * np.sum(rho * np.sum(state.u.data**2, axis=0))
    ela = np.sum(elastic_energy_density(cs, rho))
    art = delta / (beta - 1.0) * np.sum(rho**beta)
    th = np.sum((delta + rho) * state.theta.data)
    return float((kin + ela + art + th) * g.cell_volume)


def energy_inequality_check(traj, c_tol=None):
    """Residual of the discrete energy balance along a trajectory.

    residual(t) = E(t) + cumulative dissipation(t) - E(0); the tolerance
    is linear in t, tol(t) = C * dt * t.  By default C is calibrated so
    that tol(dt) equals ten times the observed first-step defect, which
    makes the check insensitive to the O(dt) splitting bias while still
    failing on injected energy.
    """
    led = traj.ledger
    t = led.column("t")
    E = led.column("total")
    D = led.column("diss_stress") + led.column("diss_eta") + led.column("diss_sink")
    residual = E + D - E[0]

    dt = traj.dt
    if c_tol is None:
        after = np.nonzero(t > 0.0)[0]
        if after.size == 0:
            raise ValueError("ledger holds no post-initial rows")
        defect1 = abs(float(residual[after[0]]))
        c_eff = 10.0 * max(defect1, 1e-300) / dt**2
    else:
        c_eff = float(c_tol)
    tolerance = c_eff * dt * t

    return InequalityReport(
        name="energy-inequality",
        residual=residual,
        tolerance=tolerance,
        times=t,
        meta={"c_tol": c_eff, "E0": float(E[0]), "dissipation_total": float(D[-1])},
    )


def effective_viscous_pressure(state, cs, params):
    """p(rho, theta) + delta*rho^beta - (lam + 2 mu + eta) * div u."""
    rho = state.rho.data
    theta = state.theta.data
    p = cs.pressure(rho, theta) + params.delta * rho**params.beta
    coef = cs.lam(theta) + 2.0 * cs.mu(theta) + params.eta
    divu = grids.div(state.u).data
    return ScalarField(state.grid, p - coef * divu)


# ---------------------------------------------------------------------------
# renormalized temperature inequality

@dataclass
class TestFunction:
    """Separable space-time test function psi(t) * chi(x).

    chi has zero normal derivative at the walls and psi(T) = 0, so the
    pair is admissible for the weak temperature inequality; derivatives
    are analytic.
    """

    name: str
    psi: object
    psi_prime: object
    chi: np.ndarray
    grad_chi: np.ndarray      # (dim,) + shape
    lap_chi: np.ndarray

    def __call__(self, t):
        return float(self.psi(t)) * self.chi


_PSI_FAMILIES = (
    ("lin", lambda s: 1.0 - s, lambda s: -1.0),
    ("quad", lambda s: (1.0 - s) ** 2, lambda s: -2.0 * (1.0 - s)),
    ("flat", lambda s: 1.0 - s * s, lambda s: -2.0 * s),
)


def _chi_profiles(grid):
    """Cosine profiles along the first axis; Neumann-compatible walls."""
    x = grid.meshgrid()[0]
    L = grid.extents[0]
    xh = x / L
    k1 = np.pi / L
    k2 = 2.0 * np.pi / L
    zero = np.zeros(grid.shape)
    rows = [
        ("unit", np.ones(grid.shape), zero, zero),
        ("cos+", 1.0 + 0.5 * np.cos(np.pi * xh),
         -0.5 * k1 * np.sin(np.pi * xh), -0.5 * k1**2 * np.cos(np.pi * xh)),
        ("cos-", 1.0 - 0.5 * np.cos(np.pi * xh),
         0.5 * k1 * np.sin(np.pi * xh), 0.5 * k1**2 * np.cos(np.pi * xh)),
        ("cos2", 1.0 + 0.5 * np.cos(2.0 * np.pi * xh),
         -0.5 * k2 * np.sin(2.0 * np.pi * xh), -0.5 * k2**2 * np.cos(2.0 * np.pi * xh)),
    ]
    return rows


def bank_renorm(grid, horizon):
    """Default 12-function bank: 3 time profiles x 4 space profiles."""
    T = float(horizon)
    bank = []
    for pname, psi_s, dpsi_s in _PSI_FAMILIES:
        psi = (lambda f: lambda t: f(t / T))(psi_s)
        dpsi = (lambda f: lambda t: f(t / T) / T)(dpsi_s)
        for cname, chi, dchi, lchi in _chi_profiles(grid):
            g = np.zeros((grid.dimension,) + grid.shape)
            g[0] = dchi
            bank.append(TestFunction(
                name=f"{pname}*{cname}", psi=psi, psi_prime=dpsi,
                chi=chi, grad_chi=g, lap_chi=lchi,
            ))
    return bank


def renorm_temperature_residual(traj, renorm, test_fn=None, c_tol=10.0, tol=None):
    """Weak renormalized temperature inequality along a trajectory.

    For weight h with primitives H and K_h, test function phi = psi*chi:

      int (d+r) H dphi/dt + int [r H u . grad phi + K_h lap phi
                                 - d th^3 h phi]
        <= int [(d-1) S:grad u h + h' kappa |grad th|^2] phi
           + int h th p_th(r) div u phi
           + eps int (th h - H) lap r phi
           - int (d+r0) H(th0) phi(0)

    The eps term restores the exact bookkeeping of the mass-diffusion
    contribution, which the eps = 0 statement drops.  Residual = LHS -
    RHS per test function; the tolerance scales with dt and the run's
    total dissipation.
    """
    # a constant h is flagged (it cannot decay) but is the legitimate
    # unrenormalized limit of the inequality; everything else must pass
    blocking = [
        c for c in renorm.failed_conditions
        if not (renorm.family == "constant" and "decay" in c)
    ]
    if blocking:
        raise ValueError("inadmissible renormalizer: " + "; ".join(blocking))
    if renorm.K_h is None:
        raise ValueError("renormalizer lacks K_h; build it with the constitutive set")

    cs, params = traj.cs, traj.params
    grid = traj.states[0].grid
    delta, eps = params.delta, params.epsilon
    times = np.asarray(traj.times, float)
    T = times[-1]
    bank = [test_fn] if test_fn is not None else bank_renorm(grid, T)
    dV = grid.cell_volume

    h, hp, H, K_h = renorm.h, renorm.h_prime, renorm.H, renorm.K_h

    # per-snapshot spatial integrals, one row per test function term
    lhs_t = np.zeros((len(bank), times.size))
    rhs_t = np.zeros((len(bank), times.size))
    for j, st in enumerate(traj.states):
        rho, theta, u = st.rho.data, st.theta.data, st.u.data
        hv = h(theta)
        Hv = H(theta)
        Kv = K_h(theta)
        Su = stress_quadrature(cs, st.u, theta)        # 2 mu |D|^2 + lam (div)^2
        gth2 = grad_sq_quadrature_scalar(st.theta)
        divu = grids.div(st.u).data
        lap_rho = grids.laplacian(st.rho, NEUMANN).data
        work = hv * theta * cs.pressure_theta_part(rho) * divu
        diss = (delta - 1.0) * Su * hv + hp(theta) * cs.kappa(theta) * gth2
        for i, tf in enumerate(bank):
            psi = float(tf.psi(times[j]))
            dpsi = float(tf.psi_prime(times[j]))
            conv = np.zeros(grid.shape)
            for ax in range(grid.dimension):
                conv += u[ax] * tf.grad_chi[ax]
            lhs_t[i, j] = (
                dpsi * np.sum((delta + rho) * Hv * tf.chi)
                + psi * np.sum(rho * Hv * conv)
                + psi * np.sum(Kv * tf.lap_chi)
                - psi * delta * np.sum(theta**3 * hv * tf.chi)
            ) * dV
            rhs_t[i, j] = psi * (
                np.sum(diss * tf.chi)
                + np.sum(work * tf.chi)
                + eps * np.sum((theta * hv - Hv) * lap_rho * tf.chi)
            ) * dV

    lhs = np.trapezoid(lhs_t, times, axis=1)
    rhs = np.trapezoid(rhs_t, times, axis=1)
    st0 = traj.states[0]
    H0 = H(st0.theta.data)
    for i, tf in enumerate(bank):
        rhs[i] -= float(tf.psi(times[0])) * np.sum(
            (delta + st0.rho.data) * H0 * tf.chi
        ) * dV

    residual = lhs - rhs
    if tol is None:
        led = traj.ledger
        D_tot = float(
            led.column("diss_stress")[-1]
            + led.column("diss_eta")[-1]
            + led.column("diss_sink")[-1]
        )
        tol = c_tol * traj.dt * (1.0 + D_tot)
    tolerance = np.full(len(bank), float(tol))

    return InequalityReport(
        name=f"renorm-temperature[{renorm.family}]",
        residual=residual,
        tolerance=tolerance,
        labels=[tf.name for tf in bank],
        meta={"lhs": lhs.tolist(), "rhs": rhs.tolist()},
    )


def grad_sq_quadrature_scalar(f):
    """|grad f|^2 cellwise for a Neumann scalar field."""
    return grids.grad_norm_sq(f)


def renorm_dissipation_weight(theta, xi, delta):
    """(1 - delta)/(xi + theta): the stress weight of the (7-6) family."""
    return (1.0 - delta) / (xi + np.asarray(theta, float))


# ---------------------------------------------------------------------------
# weighted Poincare

def weighted_poincare_check(rho, v, gamma, M1, M2):
    """Ratio ||v||_H1 / (||grad v||_L2 + int rho |v|).

    The hypotheses int rho >= M1 > 0, int rho^gamma <= M2, gamma > 6/5
    are enforced; the returned ratio is the sample's candidate for the
    constant C(M1, M2).
    """
    if gamma <= 6.0 / 5.0:
        raise ValueError("gamma must exceed 6/5")
    if M1 <= 0.0:
        raise ValueError("M1 must be positive")
    g = rho.grid
    mass = grids.integrate(rho)
    if mass < M1 * (1.0 - 1e-12):
        raise ValueError(f"int rho = {mass:.6g} violates int rho >= M1 = {M1:.6g}")
    mom = grids.integrate_values(g, rho.data**gamma)
    if mom > M2 * (1.0 + 1e-12):
        raise ValueError(f"int rho^gamma = {mom:.6g} exceeds M2 = {M2:.6g}")

    lhs = grids.h1_norm(v)
    l2 = grids.norm_l2(v)
    grad_l2 = float(np.sqrt(max(lhs**2 - l2**2, 0.0)))
    if isinstance(v, VectorField):
        mag = np.sqrt(np.sum(v.data**2, axis=0))
    else:
        mag = np.abs(v.data)
    weighted = grids.integrate_values(g, rho.data * mag)
    rhs_raw = grad_l2 + weighted
    return lhs, rhs_raw, lhs / rhs_raw


@dataclass
class PoincareBatch:
    gamma: float
    M1: float
    M2: float
    ratios: np.ndarray

    @property
    def sup_ratio(self):
        return float(np.max(self.ratios))


def _random_nonneg_density(grid, rng, modes=4):
    x = grid.meshgrid()
    prof = 0.3 * np.ones(grid.shape)
    for ax in range(grid.dimension):
        xh = x[ax] / grid.extents[ax]
        for k in range(1, modes + 1):
            prof = prof + rng.normal(scale=1.0 / k) * np.cos(k * np.pi * xh)
    return prof**2 + 1e-3


def _random_field(grid, rng, modes=4):
    x = grid.meshgrid()
    out = np.full(grid.shape, rng.normal())
    for ax in range(grid.dimension):
        xh = x[ax] / grid.extents[ax]
        for k in range(1, modes + 1):
            out = out + rng.normal(scale=1.0 / k) * np.cos(k * np.pi * xh)
            out = out + rng.normal(scale=1.0 / k) * np.sin(k * np.pi * xh)
    return out


def poincare_batch(grid, gamma, M1, M2, n_samples=1000, seed=0, kind="scalar"):
    """Empirical Poincare constant over random (rho, v) pairs.

    Densities are rescaled to int rho = M1 exactly; draws whose
    gamma-moment exceeds M2 are redrawn with an increasing blend toward
    the uniform density (the blend preserves the mass and shrinks the
    moment), so every sample satisfies the lemma's hypotheses.
    """
    volume = float(np.prod(grid.extents))
    flat = np.full(grid.shape, M1 / volume)
    if grids.integrate_values(grid, flat**gamma) > M2:
        raise ValueError(
            "moment cap M2 is infeasible: the uniform density of mass M1 "
            "already exceeds it"
        )
    rng = np.random.default_rng(seed)
    ratios = np.empty(n_samples)
    for i in range(n_samples):
        for attempt in range(200):
            raw = _random_nonneg_density(grid, rng)
            raw *= M1 / grids.integrate_values(grid, raw)
            if attempt:
                blend = min(1.0, attempt / 50.0)
                raw = (1.0 - blend) * raw + blend * flat
            if grids.integrate_values(grid, raw**gamma) <= M2:
                break
        else:
            raise RuntimeError("density sampler cannot satisfy the moment cap M2")
        rho = ScalarField(grid, raw)
        if kind == "scalar":
            v = ScalarField(grid, _random_field(grid, rng))
        else:
            v = VectorField(
                grid,
                np.stack([_random_field(grid, rng) for _ in range(grid.dimension)]),
            )
        ratios[i] = weighted_poincare_check(rho, v, gamma, M1, M2)[2]
    return PoincareBatch(gamma=gamma, M1=M1, M2=M2, ratios=ratios)
