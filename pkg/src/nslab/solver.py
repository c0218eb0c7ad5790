"""Time stepping for the triple-regularized compressible flow system.

One Lie-split step advances density (upwind-biased limited advection plus
implicit mass diffusion), then momentum (explicit advection, pressure and
diffusion-correction impulses; linearly implicit viscosity with the
coefficients frozen at the previous temperature), then temperature
(explicit advection and heating, implicit conductive diffusion via Newton
on the heat-flux primitive, and an exact per-cell integration of the
cubic radiative sink).

Bookkeeping choices are made so the recorded energy ledger errs on the
dissipative side: stress and gradient quadratures use centered
differences, which undercount the face-based dissipation the implicit
matrices actually remove, and the sink ledger entry is the exact energy
the closed-form sink step removed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from . import grids
from .constitutive import elastic_energy_density, kappa_primitive
from .grids import (
    DIRICHLET,
    NEUMANN,
    GridSpec,
    ScalarField,
    VectorField,
    _centered,
    _pad,
)

RHO_FLOOR = 1e-10
NEGATIVITY_ABORT = -1e-12
LINEAR_SOLVE_TOL = 1e-10
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50


class SolverError(RuntimeError):
    def __init__(self, stage, message, diagnostics=None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.diagnostics = diagnostics or {}
        self.partial_trajectory = None


@dataclass(frozen=True)
class RegularizationParams:
    """The three small parameters plus the artificial-pressure exponent."""

    epsilon: float
    eta: float
    delta: float
    beta: float

    def __post_init__(self):
        if self.epsilon < 0 or self.eta < 0:
            raise ValueError("epsilon and eta must be nonnegative")
        if not (0.0 <= self.delta < 1.0):
            raise ValueError("delta must lie in [0, 1)")
        if self.beta <= 1.0:
            raise ValueError("beta must exceed 1")


@dataclass
class FluidState:
    rho: ScalarField
    u: VectorField
    theta: ScalarField
    time: float = 0.0

    def __post_init__(self):
        if self.rho.grid != self.u.grid or self.rho.grid != self.theta.grid:
            raise ValueError("state fields must share one grid")

    @property
    def grid(self):
        return self.rho.grid

    def copy(self):
        return FluidState(self.rho.copy(), self.u.copy(), self.theta.copy(), self.time)


@dataclass
class EnergyLedger:
    """Per-step energy bookkeeping; dissipation columns are cumulative."""

    t: list = field(default_factory=list)
    total: list = field(default_factory=list)
    kinetic: list = field(default_factory=list)
    elastic: list = field(default_factory=list)
    artificial: list = field(default_factory=list)
    thermal: list = field(default_factory=list)
    diss_stress: list = field(default_factory=list)
    diss_eta: list = field(default_factory=list)
    diss_sink: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    min_theta: list = field(default_factory=list)
    max_speed: list = field(default_factory=list)
    clamped_cells: list = field(default_factory=list)

    COLUMNS = (
        "t", "total", "kinetic", "elastic", "artificial", "thermal",
        "diss_stress", "diss_eta", "diss_sink", "mass", "min_theta",
        "max_speed", "clamped_cells",
    )

    def append(self, **kw):
        for k in self.COLUMNS:
            getattr(self, k).append(kw[k])

    def column(self, name):
        return np.asarray(getattr(self, name), float)

    def validate(self):
        for name in ("diss_stress", "diss_eta", "diss_sink"):
            col = self.column(name)
            if np.any(np.diff(col) < -1e-13):
                raise ValueError(f"cumulative dissipation {name} decreased")
        if not np.all(np.isfinite(self.column("total"))):
            raise ValueError("non-finite energy entries")


@dataclass
class Trajectory:
    grid: GridSpec
    cs: object
    params: RegularizationParams
    dt: float
    times: list
    states: list
    ledger: EnergyLedger
    meta: dict = field(default_factory=dict)

    def state_at(self, i):
        return self.states[i]

    @property
    def final(self):
        return self.states[-1]


# ---------------------------------------------------------------------------
# energies

def energy_components(cs, state, params):
    g = state.grid
    rho = state.rho.data
    speed2 = np.sum(state.u.data**2, axis=0)
    kin = 0.5 * float(np.sum(rho * speed2)) * g.cell_volume
    ela = float(np.sum(elastic_energy_density(cs, rho))) * g.cell_volume
    art = params.delta / (params.beta - 1.0) * float(np.sum(rho**params.beta)) * g.cell_volume
    th = float(np.sum((params.delta + rho) * state.theta.data)) * g.cell_volume
    return {"kinetic": kin, "elastic": ela, "artificial": art, "thermal": th}


def total_energy(cs, state, params):
    """Kinetic + elastic + artificial-pressure + thermal energy."""
    c = energy_components(cs, state, params)
    return c["kinetic"] + c["elastic"] + c["artificial"] + c["thermal"]


# ---------------------------------------------------------------------------
# advection: minmod-limited upwind-biased fluxes, conservative form

def _minmod(a, b):
    return np.where(a * b > 0.0, np.where(np.abs(a) < np.abs(b), a, b), 0.0)


def _face_states(q, axis, bc):
    """Limited left/right reconstructions at the interior faces."""
    p = _pad(q, axis, bc, layers=1)
    n = q.shape[axis]
    body = grids._shift_slice(p, axis, 1, n)
    dm = body - grids._shift_slice(p, axis, 0, n)
    dp = grids._shift_slice(p, axis, 2, n) - body
    slope = _minmod(dm, dp)
    qL = grids._take(q + 0.5 * slope, axis, 0, n - 1)
    qR = grids._take(q - 0.5 * slope, axis, 1, n - 1)
    return qL, qR


def _face_velocity(u_comp, axis):
    n = u_comp.shape[axis]
    return 0.5 * (
        grids._take(u_comp, axis, 0, n - 1) + grids._take(u_comp, axis, 1, n - 1)
    )


def mass_fluxes(rho, u):
    """Upwind mass flux through every interior face, per axis.

    Wall faces carry zero flux (zero-trace velocity), which makes the
    advective update conservative to rounding.
    """
    fluxes = []
    for ax in range(rho.ndim):
        uf = _face_velocity(u[ax], ax)
        rL, rR = _face_states(rho, ax, NEUMANN)
        fluxes.append(uf * np.where(uf > 0.0, rL, rR))
    return fluxes


def _flux_divergence(flux, axis, h):
    pad_shape = list(flux.shape)
    pad_shape[axis] = 1
    z = np.zeros(pad_shape)
    padded = np.concatenate([z, flux, z], axis=axis)
    n = padded.shape[axis]
    return (
        grids._take(padded, axis, 1, n - 1) - grids._take(padded, axis, 0, n - 1)
    ) / h


def advect_with_mass_flux(q, fluxes, grid, bc):
    """Divergence of (mass flux * upwinded q) for a transported quantity."""
    out = np.zeros(grid.shape)
    for ax in range(grid.dimension):
        qL, qR = _face_states(q, ax, bc)
        f = fluxes[ax] * np.where(fluxes[ax] > 0.0, qL, qR)
        out += _flux_divergence(f, ax, grid.spacing[ax])
    return out


# ---------------------------------------------------------------------------
# linear algebra helpers

def _solve_tridiag(lo, di, up, rhs):
    ab = np.zeros((3, di.size))
    ab[0, 1:] = up[:-1]
    ab[1, :] = di
    ab[2, :-1] = lo[1:]
    return solve_banded((1, 1), ab, rhs)


class _Workspace:
    """Per-run cache: stencil bands, sparse operators, primitives."""

    def __init__(self, grid, cs, params, dt):
        self.grid = grid
        self.cs = cs
        self.params = params
        self.dt = dt
        self.dim = grid.dimension
        if self.dim == 1:
            n = grid.cells[0]
            h = grid.spacing[0]
            self.lapN_bands = grids._compact_1d_tri(n, h, NEUMANN)
        else:
            self.lapN = grids.neumann_laplacian_matrix(grid)
            self.cd = {
                (ax, bc): grids.centered_derivative_matrix(grid, ax, bc)
                for ax in range(2)
                for bc in (NEUMANN, DIRICHLET)
            }
        self._rho_solver = None

    # continuity diffusion: (I - eps*dt*L) x = rhs, prefactorized
    def solve_mass_diffusion(self, rhs):
        eps_dt = self.params.epsilon * self.dt
        if eps_dt == 0.0:
            return rhs
        if self.dim == 1:
            lo, di, up = self.lapN_bands
            return _solve_tridiag(-eps_dt * lo, 1.0 - eps_dt * di, -eps_dt * up, rhs)
        if self._rho_solver is None:
            from scipy.sparse import identity
            from scipy.sparse.linalg import splu

            n = rhs.size
            self._rho_solver = splu((identity(n, format="csc") - eps_dt * self.lapN.tocsc()))
        return self._rho_solver.solve(rhs.ravel()).reshape(self.grid.shape)

    def kappa_values(self, theta):
        th = np.maximum(theta, 0.0)
        return self.cs.kappa(th)

    def K_values(self, theta):
        # linear extension below zero keeps Newton iterates well defined
        th = np.asarray(theta, float)
        pos = kappa_primitive(self.cs, np.maximum(th, 0.0))
        k0 = float(self.cs.kappa(0.0))
        return np.where(th >= 0.0, pos, k0 * th)


def _viscous_face_coef_1d(grid, coef_cells):
    n = grid.cells[0]
    cf = np.empty(n + 1)
    cf[1:n] = 0.5 * (coef_cells[:-1] + coef_cells[1:])
    cf[0] = coef_cells[0]
    cf[n] = coef_cells[-1]
    return cf


def _assemble_momentum_matrix(ws, rho_new, mu_c, lam_c):
    """diag(rho) - dt * (viscous operator), frozen coefficients."""
    grid, dt, eta = ws.grid, ws.dt, ws.params.eta
    if ws.dim == 1:
        coef = 2.0 * mu_c + lam_c + eta
        cf = _viscous_face_coef_1d(grid, coef)
        lo, di, up = grids._compact_1d_tri(grid.cells[0], grid.spacing[0], DIRICHLET, cf)
        rho_d = np.maximum(rho_new, RHO_FLOOR)
        return (-dt * lo, rho_d - dt * di, -dt * up)
    from scipy.sparse import bmat, diags

    mu_f = mu_c.ravel()
    lam_f = lam_c.ravel()
    own_x = grids.variable_diffusion_matrix(grid, (2 * mu_c + lam_c + eta), DIRICHLET, axes=(0,))
    own_y = grids.variable_diffusion_matrix(grid, (2 * mu_c + lam_c + eta), DIRICHLET, axes=(1,))
    crs_x = grids.variable_diffusion_matrix(grid, (mu_c + eta), DIRICHLET, axes=(0,))
    crs_y = grids.variable_diffusion_matrix(grid, (mu_c + eta), DIRICHLET, axes=(1,))
    dxN, dyN = ws.cd[(0, NEUMANN)], ws.cd[(1, NEUMANN)]
    dxD, dyD = ws.cd[(0, DIRICHLET)], ws.cd[(1, DIRICHLET)]
    A_xx = own_x + crs_y
    A_yy = own_y + crs_x
    A_xy = dxN @ diags(lam_f) @ dyD + dyN @ diags(mu_f) @ dxD
    A_yx = dyN @ diags(lam_f) @ dxD + dxN @ diags(mu_f) @ dyD
    A = bmat([[A_xx, A_xy], [A_yx, A_yy]], format="csc")
    from scipy.sparse import identity

    n = rho_new.size
    rho_d = np.maximum(rho_new.ravel(), RHO_FLOOR)
    M = diags(np.concatenate([rho_d, rho_d]), format="csc") - dt * A
    return M


def stress_quadrature(cs, u_field, theta_ref):
    """Cellwise 2 mu |D(u)|^2 + lam (div u)^2 with centered gradients."""
    D = grids.sym_gradient(u_field)
    divu = np.trace(D, axis1=-2, axis2=-1)
    D2 = np.sum(D * D, axis=(-2, -1))
    mu_c = cs.mu(theta_ref)
    lam_c = cs.lam(theta_ref)
    return 2.0 * mu_c * D2 + lam_c * divu**2


def grad_sq_quadrature(u_field):
    """Cellwise |grad u|^2 (Frobenius), centered Dirichlet differences."""
    J = grids.velocity_jacobian(u_field)
    return np.sum(J * J, axis=(-2, -1))


# ---------------------------------------------------------------------------
# sub-steps

def _continuity_substep(state, ws):
    grid = state.grid
    rho = state.rho.data
    fluxes = mass_fluxes(rho, state.u.data)
    div_f = np.zeros(grid.shape)
    for ax in range(grid.dimension):
        div_f += _flux_divergence(fluxes[ax], ax, grid.spacing[ax])
    rho_adv = rho - ws.dt * div_f
    m = float(np.min(rho_adv))
    if m < NEGATIVITY_ABORT:
        umax = float(np.max(np.abs(state.u.data)))
        raise SolverError(
            "continuity",
            f"density {m:.3e} fell below the negativity guard",
            {
                "time": state.time,
                "max_speed": umax,
                "advective_cfl": umax * ws.dt / min(grid.spacing),
                "suggested_dt": 0.4 * min(grid.spacing) / max(umax, 1e-30),
            },
        )
    clamped = int(np.count_nonzero(rho_adv < RHO_FLOOR))
    rho_adv = np.maximum(rho_adv, RHO_FLOOR)
    rho_new = ws.solve_mass_diffusion(rho_adv)
    if ws.params.epsilon * ws.dt > 0.0:
        # direct solve; verify the residual anyway
        resid = _mass_diffusion_residual(ws, rho_new, rho_adv)
        if resid > LINEAR_SOLVE_TOL:
            raise SolverError("continuity", f"diffusion solve residual {resid:.3e}", {"residual": resid})
    return rho_new, fluxes, clamped


def _mass_diffusion_residual(ws, x, rhs):
    eps_dt = ws.params.epsilon * ws.dt
    if ws.dim == 1:
        lo, di, up = ws.lapN_bands
        Lx = di * x
        Lx[1:] += lo[1:] * x[:-1]
        Lx[:-1] += up[:-1] * x[1:]
    else:
        Lx = (ws.lapN @ x.ravel()).reshape(x.shape)
    r = x - eps_dt * Lx - rhs
    return float(np.max(np.abs(r)) / max(1.0, np.max(np.abs(rhs))))


def _momentum_substep(state, rho_new, ws, fluxes, forcing=None):
    grid = state.grid
    cs, params, dt = ws.cs, ws.params, ws.dt
    rho_old = state.rho.data
    u = state.u.data
    theta = state.theta.data

    m_star = rho_old[None, ...] * u
    for i in range(grid.dimension):
        m_star[i] -= dt * advect_with_mass_flux(u[i], fluxes, grid, DIRICHLET)

    p = cs.pressure(rho_new, theta) + params.delta * rho_new**params.beta
    for ax in range(grid.dimension):
        gp = _centered(p, ax, grid.spacing[ax], NEUMANN)
        m_star[ax] -= dt * gp

    if params.epsilon > 0.0:
        grad_rho = [
            _centered(rho_old, ax, grid.spacing[ax], NEUMANN)
            for ax in range(grid.dimension)
        ]
        for i in range(grid.dimension):
            corr = np.zeros(grid.shape)
            for j in range(grid.dimension):
                corr += _centered(u[i], j, grid.spacing[j], DIRICHLET) * grad_rho[j]
            m_star[i] -= dt * params.epsilon * corr

    if forcing is not None:
        m_star += dt * forcing

    mu_c = cs.mu(theta)
    lam_c = cs.lam(theta)
    sys = _assemble_momentum_matrix(ws, rho_new, mu_c, lam_c)
    if grid.dimension == 1:
        lo, di, up = sys
        u_new = _solve_tridiag(lo, di, up, m_star[0])[None, ...]
        resid = di * u_new[0]
        resid[1:] += lo[1:] * u_new[0][:-1]
        resid[:-1] += up[:-1] * u_new[0][1:]
        rnorm = float(np.max(np.abs(resid - m_star[0])) / max(1.0, np.max(np.abs(m_star))))
    else:
        from scipy.sparse.linalg import splu

        rhs = np.concatenate([m_star[0].ravel(), m_star[1].ravel()])
        sol = splu(sys).solve(rhs)
        rnorm = float(
            np.max(np.abs(sys @ sol - rhs)) / max(1.0, np.max(np.abs(rhs)))
        )
        n = rho_new.size
        u_new = np.stack([sol[:n].reshape(grid.shape), sol[n:].reshape(grid.shape)])
    if rnorm > LINEAR_SOLVE_TOL:
        raise SolverError("momentum", f"viscous solve residual {rnorm:.3e}", {"residual": rnorm})
    return u_new


def _temperature_substep(state, rho_new, u_new, ws, fluxes):
    grid = state.grid
    cs, params, dt = ws.cs, ws.params, ws.dt
    rho_old = state.rho.data
    theta = state.theta.data
    delta = params.delta

    u_field = VectorField(grid, u_new)
    q_cell = stress_quadrature(cs, u_field, theta)
    q_cell = np.maximum(q_cell, 0.0)  # nonnegative by the bulk constraint

    div_u = grids.div(u_field).data
    work_coef = cs.pressure_theta_part(rho_new) * div_u
    cooling = np.maximum(work_coef, 0.0)
    heating = np.maximum(-work_coef, 0.0)

    w = (delta + rho_old) * theta
    w -= dt * advect_with_mass_flux(theta, fluxes, grid, NEUMANN)
    w += dt * (1.0 - delta) * q_cell
    w += dt * heating * theta
    if np.any(w < -1e-12 * max(1.0, float(np.max(np.abs(w))))):
        raise SolverError("temperature", "advective update lost positivity", {"min_w": float(np.min(w))})
    w = np.maximum(w, 0.0)

    M = delta + rho_new + dt * cooling
    theta_star = _kirchhoff_solve(ws, M, w, theta)

    # closed-form sink: (delta+rho) theta' = -delta theta^3 over one step
    if delta > 0.0:
        a = delta / (delta + rho_new)
        theta_new = theta_star / np.sqrt(1.0 + 2.0 * dt * a * theta_star**2)
        sink_energy = float(np.sum((delta + rho_new) * (theta_star - theta_new))) * grid.cell_volume
    else:
        theta_new = theta_star
        sink_energy = 0.0
    return theta_new, sink_energy


def _kirchhoff_solve(ws, M, w, theta_init):
    """Newton solve of M*theta - dt*L K(theta) = w (Neumann heat flux)."""
    grid, dt = ws.grid, ws.dt
    x = np.maximum(theta_init.copy(), 0.0)
    scale = max(1.0, float(np.max(np.abs(w))))

    def residual(xv):
        Kx = ws.K_values(xv)
        if ws.dim == 1:
            lo, di, up = ws.lapN_bands
            LK = di * Kx
            LK[1:] += lo[1:] * Kx[:-1]
            LK[:-1] += up[:-1] * Kx[1:]
        else:
            LK = (ws.lapN @ Kx.ravel()).reshape(grid.shape)
        return M * xv - dt * LK - w

    F = residual(x)
    for it in range(NEWTON_MAX_ITER):
        err = float(np.max(np.abs(F)))
        if err <= NEWTON_TOL * scale:
            return x
        kap = ws.kappa_values(x)
        if ws.dim == 1:
            lo, di, up = ws.lapN_bands
            J_lo = -dt * lo * np.concatenate([[0.0], kap[:-1]])
            J_di = M - dt * di * kap
            J_up = -dt * up * np.concatenate([kap[1:], [0.0]])
            step = _solve_tridiag(J_lo, J_di, J_up, -F)
        else:
            from scipy.sparse import diags
            from scipy.sparse.linalg import splu

            J = diags(M.ravel(), format="csc") - dt * (ws.lapN.tocsc() @ diags(kap.ravel(), format="csc"))
            step = splu(J).solve(-F.ravel()).reshape(grid.shape)
        lam = 1.0
        for _ in range(8):
            x_try = x + lam * step
            F_try = residual(x_try)
            if float(np.max(np.abs(F_try))) < err:
                x, F = x_try, F_try
                break
            lam *= 0.5
        else:
            x = x + step
            F = residual(x)
    err = float(np.max(np.abs(F)))
    if err > NEWTON_TOL * scale:
        worst = int(np.argmax(np.abs(F)))
        raise SolverError(
            "temperature",
            f"Kirchhoff Newton stalled at residual {err:.3e}",
            {"cell": worst, "residual": err},
        )
    return x


# ---------------------------------------------------------------------------
# public single-field steps (operator-level API)

def step_continuity(state, params, dt, cs=None):
    """One continuity sub-step from the given state; returns the new density."""
    ws = _Workspace(state.grid, cs, params, dt)
    rho_new, _, _ = _continuity_substep(state, ws)
    return ScalarField(state.grid, rho_new)


def step_momentum(state, cs, params, dt, forcing=None):
    """One momentum sub-step at frozen density; returns the new velocity."""
    ws = _Workspace(state.grid, cs, params, dt)
    fluxes = mass_fluxes(state.rho.data, state.u.data)
    u_new = _momentum_substep(state, state.rho.data, ws, fluxes, forcing)
    return VectorField(state.grid, u_new)


def step_temperature(state, cs, params, dt):
    """One temperature sub-step at frozen density/velocity."""
    ws = _Workspace(state.grid, cs, params, dt)
    fluxes = mass_fluxes(state.rho.data, state.u.data)
    theta_new, _ = _temperature_substep(state, state.rho.data, state.u.data, ws, fluxes)
    return ScalarField(state.grid, theta_new)


# ---------------------------------------------------------------------------
# dt policy

def suggest_dt(state, cs, params, cfl_advection=0.4, cfl_diffusion=0.25, dt_max=0.05):
    """Stability-envelope step size from the current state.

    The diffusion bound treats the stiffest coefficient among mass
    diffusion, momentum diffusion, and heat diffusion; implicit stages
    tolerate larger steps, so this is deliberately conservative.
    """
    g = state.grid
    h = min(g.spacing)
    umax = float(np.max(np.abs(state.u.data)))
    th_max = float(np.max(state.theta.data))
    rho_min = float(np.min(state.rho.data))
    visc = params.eta + 2.0 * float(cs.mu(th_max)) + abs(float(cs.lam(th_max)))
    heat = float(cs.kappa(th_max)) / max(params.delta + rho_min, 1e-12)
    diff = max(params.epsilon, visc, heat)
    dt_adv = cfl_advection * h / umax if umax > 0 else np.inf
    dt_diff = cfl_diffusion * h * h / diff if diff > 0 else np.inf
    return float(min(dt_adv, dt_diff, dt_max))


# ---------------------------------------------------------------------------
# orchestration

def simulate(cs, init, params, dt, t_end, snapshot_stride=10, forcing=None,
             record_initial_ledger=True):
    """March the split scheme from regularized initial data.

    `init` is an InitialData triple (density, momentum, temperature); the
    velocity is recovered as m/rho.  Returns a Trajectory with snapshot
    states and a per-step EnergyLedger.  On a sub-step failure the
    partial trajectory is attached to the raised SolverError.
    """
    grid = init.grid
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    rho0 = np.maximum(init.rho.data, RHO_FLOOR)
    u0 = init.momentum.data / rho0[None, ...]
    state = FluidState(
        ScalarField(grid, rho0.copy()),
        VectorField(grid, u0),
        init.theta.copy(),
        0.0,
    )
    ws = _Workspace(grid, cs, params, dt)
    n_steps = int(round(t_end / dt))
    if abs(n_steps * dt - t_end) > 1e-9 * t_end:
        n_steps = int(np.ceil(t_end / dt))

    ledger = EnergyLedger()
    diss = {"stress": 0.0, "eta": 0.0, "sink": 0.0}

    def record(st, clamped):
        comp = energy_components(cs, st, params)
        ledger.append(
            t=st.time,
            total=sum(comp.values()),
            kinetic=comp["kinetic"],
            elastic=comp["elastic"],
            artificial=comp["artificial"],
            thermal=comp["thermal"],
            diss_stress=diss["stress"],
            diss_eta=diss["eta"],
            diss_sink=diss["sink"],
            mass=grids.integrate_values(grid, st.rho.data),
            min_theta=float(np.min(st.theta.data)),
            max_speed=float(np.max(np.abs(st.u.data))),
            clamped_cells=clamped,
        )

    times = [0.0]
    states = [state.copy()]
    if record_initial_ledger:
        record(state, 0)
    total_clamped = 0

    for n in range(1, n_steps + 1):
        try:
            rho_new, fluxes, clamped = _continuity_substep(state, ws)
            u_new = _momentum_substep(state, rho_new, ws, fluxes, forcing)
            theta_new, sink_energy = _temperature_substep(state, rho_new, u_new, ws, fluxes)
        except SolverError as err:
            err.partial_trajectory = Trajectory(
                grid, cs, params, dt, times, states, ledger,
                {"aborted_at_step": n, "clamped_cells": total_clamped},
            )
            err.diagnostics.setdefault("time", state.time)
            err.diagnostics["step"] = n
            raise

        total_clamped += clamped
        u_f = VectorField(grid, u_new)
        quad = stress_quadrature(cs, u_f, state.theta.data)
        diss["stress"] += dt * params.delta * grids.integrate_values(grid, quad)
        diss["eta"] += dt * params.eta * grids.integrate_values(grid, grad_sq_quadrature(u_f))
        diss["sink"] += sink_energy

        state = FluidState(
            ScalarField(grid, rho_new),
            u_f,
            ScalarField(grid, theta_new),
            n * dt,
        )
        record(state, clamped)
        if n % snapshot_stride == 0 or n == n_steps:
            times.append(state.time)
            states.append(state.copy())

    ledger.validate()
    return Trajectory(
        grid, cs, params, dt, times, states, ledger,
        {"steps": n_steps, "clamped_cells": total_clamped},
    )
