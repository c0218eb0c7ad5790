"""Cell-centered grids on 1D intervals and 2D rectangles, with the
difference operators used everywhere else in the package.

Scalars carry zero-flux (Neumann) boundaries implemented by ghost
reflection; velocities carry zero-trace (Dirichlet) boundaries implemented
by ghost antireflection.  With that pairing the centered gradient and
divergence satisfy a summation-by-parts identity exactly (telescoping),
and the public laplacian is the div(grad(.)) composite so the two agree
by construction.  Implicit solvers elsewhere assemble their own compact
flux-form matrices; see `neumann_laplacian_matrix` and friends.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

NEUMANN = "neumann"
DIRICHLET = "dirichlet"

_MAGIC = b"NSLB"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid: `cells[d]` cells over `extents[d]`."""

    extents: tuple
    cells: tuple

    def __post_init__(self):
        if len(self.extents) != len(self.cells):
            raise ValueError("extents and cells must have matching length")
        if len(self.cells) not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if any(n < 8 for n in self.cells):
            raise ValueError("grids need at least 8 cells per axis")
        if any(not (L > 0) for L in self.extents):
            raise ValueError("extents must be positive")

    @property
    def dimension(self):
        return len(self.cells)

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.extents, self.cells))

    @property
    def cell_volume(self):
        v = 1.0
        for h in self.spacing:
            v *= h
        return v

    @property
    def shape(self):
        return tuple(self.cells)

    def axes(self):
        """Cell-center coordinates along each axis."""
        return tuple(
            (np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)
        )

    def meshgrid(self):
        return np.meshgrid(*self.axes(), indexing="ij")


def _check_field_data(grid, data):
    if data.shape != grid.shape:
        raise ValueError(f"data shape {data.shape} != grid shape {grid.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError("field contains non-finite entries")


@dataclass
class ScalarField:
    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        _check_field_data(self.grid, self.data)

    def copy(self):
        return ScalarField(self.grid, self.data.copy())


@dataclass
class VectorField:
    """Velocity-like field; components stacked along the leading axis."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape[0] != self.grid.dimension:
            raise ValueError("component count must equal grid dimension")
        for c in self.data:
            _check_field_data(self.grid, c)

    @property
    def components(self):
        return tuple(self.data)

    def copy(self):
        return VectorField(self.grid, self.data.copy())


def scalar_field(grid, values):
    return ScalarField(grid, np.broadcast_to(np.asarray(values, float), grid.shape).copy())


def vector_field(grid, *components):
    if len(components) == 1 and np.ndim(components[0]) == grid.dimension + 1:
        return VectorField(grid, np.array(components[0], dtype=float))
    comps = [np.broadcast_to(np.asarray(c, float), grid.shape) for c in components]
    return VectorField(grid, np.stack(comps))


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


# ---------------------------------------------------------------------------
# ghost extension and centered differences

def _pad(a, axis, bc, layers=1):
    """Extend `a` by ghost layers: reflection for Neumann (mirror), odd
    antireflection for Dirichlet (boundary value zero at the face)."""
    sign = 1.0 if bc == NEUMANN else -1.0
    lo = sign * np.flip(_take(a, axis, 0, layers), axis=axis)
    hi = sign * np.flip(_take(a, axis, a.shape[axis] - layers, layers), axis=axis)
    return np.concatenate([lo, a, hi], axis=axis)


def _take(a, axis, start, count):
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, start + count)
    return a[tuple(sl)]


def _shift_slice(a, axis, offset, length):
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(offset, offset + length)
    return a[tuple(sl)]


def _centered(a, axis, h, bc):
    """Second-order centered first difference with one ghost layer."""
    p = _pad(a, axis, bc, layers=1)
    n = a.shape[axis]
    return (_shift_slice(p, axis, 2, n) - _shift_slice(p, axis, 0, n)) / (2.0 * h)


def _wide_second(a, axis, h, bc):
    """Centered second difference with stride 2h (grad/div composite)."""
    p = _pad(a, axis, bc, layers=2)
    n = a.shape[axis]
    return (
        _shift_slice(p, axis, 4, n) - 2.0 * a + _shift_slice(p, axis, 0, n)
    ) / (4.0 * h * h)


def partial(a, axis, grid, bc):
    return _centered(np.asarray(a, float), axis, grid.spacing[axis], bc)


# ---------------------------------------------------------------------------
# public operators

def grad(f):
    """Gradient of a scalar (Neumann ghosts). Returns a VectorField."""
    g = f.grid
    comps = [_centered(f.data, ax, g.spacing[ax], NEUMANN) for ax in range(g.dimension)]
    return VectorField(g, np.stack(comps))


def div(v):
    """Divergence of a vector (Dirichlet ghosts). Returns a ScalarField."""
    g = v.grid
    out = np.zeros(g.shape)
    for ax in range(g.dimension):
        out += _centered(v.data[ax], ax, g.spacing[ax], DIRICHLET)
    return ScalarField(g, out)


def laplacian(f, bc):
    """Laplacian of a scalar under the requested boundary condition.

    Implemented as the exact grad/div composite (stride-2h stencil), so
    div(grad(f)) and laplacian(f, .) coincide on interior-supported data.
    """
    if bc not in (NEUMANN, DIRICHLET):
        raise ValueError(f"unknown boundary condition {bc!r}")
    g = f.grid
    out = np.zeros(g.shape)
    for ax in range(g.dimension):
        out += _wide_second(f.data, ax, g.spacing[ax], bc)
    return ScalarField(g, out)


def sym_gradient(v):
    """Symmetric gradient D(u) = (grad u + grad u^T)/2 of a velocity.

    Returns an ndarray of shape grid.shape + (d, d).  Component partials
    use Dirichlet ghosts, matching the zero-trace boundary.
    """
    g = v.grid
    d = g.dimension
    J = np.empty(g.shape + (d, d))
    for i in range(d):
        for j in range(d):
            J[..., i, j] = _centered(v.data[i], j, g.spacing[j], DIRICHLET)
    return 0.5 * (J + np.swapaxes(J, -1, -2))


def velocity_jacobian(v):
    """J[..., i, j] = d u_i / d x_j with Dirichlet ghosts."""
    g = v.grid
    d = g.dimension
    J = np.empty(g.shape + (d, d))
    for i in range(d):
        for j in range(d):
            J[..., i, j] = _centered(v.data[i], j, g.spacing[j], DIRICHLET)
    return J


def integrate(f):
    """Cell-volume weighted sum; accepts fields or raw arrays on a grid."""
    if isinstance(f, (ScalarField, VectorField)):
        return float(np.sum(f.data) * f.grid.cell_volume)
    raise TypeError("integrate expects a ScalarField or VectorField")


def integrate_values(grid, values):
    return float(np.sum(values) * grid.cell_volume)


def inner(a, b):
    """L2 inner product; vector fields contract over components."""
    _same_grid(a, b)
    if type(a) is not type(b):
        raise TypeError("inner product needs fields of the same kind")
    return float(np.sum(a.data * b.data) * a.grid.cell_volume)


def norm_l2(a):
    return float(np.sqrt(max(inner(a, a), 0.0)))


def grad_norm_sq(f):
    """|grad f|^2 cellwise (Neumann ghosts), as a raw array."""
    g = f.grid
    out = np.zeros(g.shape)
    for ax in range(g.dimension):
        out += _centered(f.data, ax, g.spacing[ax], NEUMANN) ** 2
    return out


def h1_norm(f):
    """Discrete H1 norm of a scalar or vector field."""
    if isinstance(f, ScalarField):
        s = np.sum(f.data**2) + np.sum(grad_norm_sq(f))
    else:
        s = np.sum(f.data**2)
        for c in f.data:
            s += np.sum(
                sum(
                    _centered(c, ax, f.grid.spacing[ax], DIRICHLET) ** 2
                    for ax in range(f.grid.dimension)
                )
            )
    return float(np.sqrt(s * f.grid.cell_volume))


# ---------------------------------------------------------------------------
# compact flux-form matrices for implicit solvers (sparse, SPD-friendly)

def _compact_1d_tri(n, h, bc, coef_face=None):
    """Tridiagonal bands of d/dx(c d/dx .) with face coefficients.

    coef_face: array of n+1 face values (boundary faces included); None
    means unit coefficient.  Dirichlet uses the antireflected ghost, so
    the boundary face difference is 2*u0/h.
    """
    if coef_face is None:
        coef_face = np.ones(n + 1)
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    inv_h2 = 1.0 / (h * h)
    # interior faces k=1..n-1 connect cells k-1,k
    cf = coef_face[1:n]
    diag[:-1] -= cf * inv_h2
    diag[1:] -= cf * inv_h2
    upper[:-1] += cf * inv_h2
    lower[1:] += cf * inv_h2
    if bc == DIRICHLET:
        # ghost = -first cell: boundary face flux 2*c*u/h
        diag[0] -= 2.0 * coef_face[0] * inv_h2
        diag[-1] -= 2.0 * coef_face[n] * inv_h2
    # Neumann: zero boundary-face flux, nothing to add
    return lower, diag, upper


def tridiag_matrix(n, h, bc, coef_face=None):
    from scipy.sparse import diags

    lo, di, up = _compact_1d_tri(n, h, bc, coef_face)
    return diags([lo[1:], di, up[:-1]], offsets=[-1, 0, 1], format="csr")


def neumann_laplacian_matrix(grid):
    """Compact 3/5-point Neumann laplacian; zero row and column sums."""
    from scipy.sparse import identity, kron

    mats = [tridiag_matrix(n, h, NEUMANN) for n, h in zip(grid.cells, grid.spacing)]
    if grid.dimension == 1:
        return mats[0]
    nx, ny = grid.cells
    return kron(mats[0], identity(ny, format="csr"), format="csr") + kron(
        identity(nx, format="csr"), mats[1], format="csr"
    )


def dirichlet_laplacian_matrix(grid):
    from scipy.sparse import identity, kron

    mats = [tridiag_matrix(n, h, DIRICHLET) for n, h in zip(grid.cells, grid.spacing)]
    if grid.dimension == 1:
        return mats[0]
    nx, ny = grid.cells
    return kron(mats[0], identity(ny, format="csr"), format="csr") + kron(
        identity(nx, format="csr"), mats[1], format="csr"
    )


def variable_diffusion_matrix(grid, cell_coef, bc, axes=None):
    """Assemble d/dx_j (c d/dx_j .) summed over `axes`, c given per cell.

    Face coefficients are arithmetic means of the adjacent cells; at the
    boundary the ghost cell mirrors (Neumann data for the coefficient).
    axes=None means all grid axes.
    """
    from scipy.sparse import csr_matrix

    c = np.asarray(cell_coef, float)
    if axes is None:
        axes = tuple(range(grid.dimension))
    if grid.dimension == 1:
        n = grid.cells[0]
        cf = np.empty(n + 1)
        cf[1:n] = 0.5 * (c[:-1] + c[1:])
        cf[0] = c[0]
        cf[n] = c[-1]
        return tridiag_matrix(n, grid.spacing[0], bc, cf)
    # 2D: build per-axis with row-dependent coefficients by assembling COO
    nx, ny = grid.cells
    hx, hy = grid.spacing
    idx = np.arange(nx * ny).reshape(nx, ny)
    rows, cols, vals = [], [], []

    def add(r, cidx, v):
        rows.append(r.ravel())
        cols.append(cidx.ravel())
        vals.append(v.ravel())

    if 0 in axes:
        # x-direction faces between (i,j) and (i+1,j)
        cfx = 0.5 * (c[:-1, :] + c[1:, :])
        inv_hx2 = 1.0 / (hx * hx)
        add(idx[:-1, :], idx[:-1, :], -cfx * inv_hx2)
        add(idx[1:, :], idx[1:, :], -cfx * inv_hx2)
        add(idx[:-1, :], idx[1:, :], cfx * inv_hx2)
        add(idx[1:, :], idx[:-1, :], cfx * inv_hx2)
        if bc == DIRICHLET:
            add(idx[0, :], idx[0, :], -2.0 * c[0, :] * inv_hx2)
            add(idx[-1, :], idx[-1, :], -2.0 * c[-1, :] * inv_hx2)
    if 1 in axes:
        # y-direction faces
        cfy = 0.5 * (c[:, :-1] + c[:, 1:])
        inv_hy2 = 1.0 / (hy * hy)
        add(idx[:, :-1], idx[:, :-1], -cfy * inv_hy2)
        add(idx[:, 1:], idx[:, 1:], -cfy * inv_hy2)
        add(idx[:, :-1], idx[:, 1:], cfy * inv_hy2)
        add(idx[:, 1:], idx[:, :-1], cfy * inv_hy2)
        if bc == DIRICHLET:
            add(idx[:, 0], idx[:, 0], -2.0 * c[:, 0] * inv_hy2)
            add(idx[:, -1], idx[:, -1], -2.0 * c[:, -1] * inv_hy2)
    m = csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nx * ny, nx * ny),
    )
    return m


def centered_derivative_matrix(grid, axis, bc):
    """Sparse matrix of the centered first difference along one axis."""
    from scipy.sparse import diags, identity, kron

    n = grid.cells[axis]
    h = grid.spacing[axis]
    main = np.zeros(n)
    up = np.full(n - 1, 1.0 / (2 * h))
    lo = np.full(n - 1, -1.0 / (2 * h))
    # ghost contributions: row 0 sees ghost = sign*u0; row n-1 sees sign*u_{n-1}
    sign = 1.0 if bc == NEUMANN else -1.0
    main[0] += -sign / (2 * h)
    main[-1] += sign / (2 * h)
    d1 = diags([lo, main, up], offsets=[-1, 0, 1], format="csr")
    if grid.dimension == 1:
        return d1
    nx, ny = grid.cells
    if axis == 0:
        return kron(d1, identity(ny, format="csr"), format="csr")
    return kron(identity(nx, format="csr"), d1, format="csr")


# ---------------------------------------------------------------------------
# snapshot serialization: small self-describing binary + CSV export

def save_field(path, field):
    """Write a field as header + row-major float64 payload."""
    g = field.grid
    ncomp = 1 if isinstance(field, ScalarField) else g.dimension
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _FORMAT_VERSION, g.dimension, ncomp))
        for n in g.cells:
            fh.write(struct.pack("<I", n))
        for L in g.extents:
            fh.write(struct.pack("<d", L))
        data = field.data if ncomp > 1 else field.data[None, ...]
        fh.write(np.ascontiguousarray(data, dtype="<f8").tobytes())


def load_field(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a field snapshot (bad magic {magic!r})")
        version, dim, ncomp = struct.unpack("<III", fh.read(12))
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        cells = struct.unpack("<" + "I" * dim, fh.read(4 * dim))
        extents = struct.unpack("<" + "d" * dim, fh.read(8 * dim))
        grid = GridSpec(tuple(extents), tuple(cells))
        count = ncomp * int(np.prod(cells))
        payload = np.frombuffer(fh.read(8 * count), dtype="<f8").astype(float)
    data = payload.reshape((ncomp,) + grid.shape)
    if ncomp == 1:
        return ScalarField(grid, data[0])
    return VectorField(grid, data)


def field_to_csv(path, field, name="value"):
    import csv

    g = field.grid
    axes = g.meshgrid()
    ncomp = 1 if isinstance(field, ScalarField) else g.dimension
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        coords = ["x", "y"][: g.dimension]
        if ncomp == 1:
            w.writerow(coords + [name])
            for pt in zip(*(a.ravel() for a in axes), field.data.ravel()):
                w.writerow([repr(v) for v in pt])
        else:
            w.writerow(coords + [f"{name}_{c}" for c in coords])
            cols = [a.ravel() for a in axes] + [c.ravel() for c in field.data]
            for pt in zip(*cols):
                w.writerow([repr(v) for v in pt])
