import numpy as np
import pytest

from nslab import grids
from nslab.grids import (
    DIRICHLET,
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
    sym_gradient,
    vector_field,
)

RNG = np.random.default_rng(20240811)


def smooth_scalar(grid, rng):
    """Random smooth field built from a few low-frequency cosine modes."""
    out = np.zeros(grid.shape)
    axes = grid.axes()
    for _ in range(4):
        term = np.ones(grid.shape)
        for ax in range(grid.dimension):
            k = rng.integers(0, 4)
            shape = [1] * grid.dimension
            shape[ax] = -1
            xhat = (axes[ax] / grid.extents[ax]).reshape(shape)
            term = term * np.cos(np.pi * k * xhat)
        out += rng.normal() * term
    return out


def smooth_dirichlet_vector(grid, rng):
    comps = []
    axes = grid.axes()
    for _ in range(grid.dimension):
        c = np.zeros(grid.shape)
        for _ in range(3):
            term = np.ones(grid.shape)
            for ax in range(grid.dimension):
                k = rng.integers(1, 4)
                shape = [1] * grid.dimension
                shape[ax] = -1
                xhat = (axes[ax] / grid.extents[ax]).reshape(shape)
                term = term * np.sin(np.pi * k * xhat)
            c += rng.normal() * term
        comps.append(c)
    return VectorField(grid, np.stack(comps))


GRIDS = [GridSpec((1.0,), (64,)), GridSpec((1.0, 0.8), (24, 20))]


class TestGridSpec:
    def test_spacing_and_volume(self):
        g = GridSpec((2.0,), (16,))
        assert g.spacing == (0.125,)
        assert g.cell_volume == pytest.approx(0.125)

    def test_rejects_too_few_cells(self):
        with pytest.raises(ValueError):
            GridSpec((1.0,), (4,))

    def test_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            GridSpec((1.0, 1.0, 1.0), (8, 8, 8))

    def test_axes_are_cell_centers(self):
        g = GridSpec((1.0,), (8,))
        x = g.axes()[0]
        assert x[0] == pytest.approx(0.5 / 8)
        assert x[-1] == pytest.approx(1.0 - 0.5 / 8)


class TestFieldValidation:
    def test_shape_mismatch(self):
        g = GridSpec((1.0,), (16,))
        with pytest.raises(ValueError):
            ScalarField(g, np.zeros(8))

    def test_nonfinite_rejected(self):
        g = GridSpec((1.0,), (16,))
        bad = np.zeros(16)
        bad[3] = np.nan
        with pytest.raises(ValueError):
            ScalarField(g, bad)

    def test_vector_component_count(self):
        g = GridSpec((1.0, 1.0), (8, 8))
        with pytest.raises(ValueError):
            VectorField(g, np.zeros((3, 8, 8)))

    def test_inner_grid_mismatch(self):
        a = scalar_field(GridSpec((1.0,), (16,)), 1.0)
        b = scalar_field(GridSpec((1.0,), (32,)), 1.0)
        with pytest.raises(ValueError):
            inner(a, b)


class TestOperatorIdentities:
    def test_laplacian_of_constant_is_zero(self):
        for g in GRIDS:
            f = scalar_field(g, 3.7)
            assert np.max(np.abs(laplacian(f, NEUMANN).data)) == 0.0

    def test_grad_of_linear_is_exact_inside(self):
        g = GridSpec((1.0,), (32,))
        f = scalar_field(g, g.axes()[0])
        gf = grad(f).data[0]
        # interior cells see the exact slope; boundary cells feel the mirror ghost
        assert np.max(np.abs(gf[1:-1] - 1.0)) == 0.0

    def test_div_grad_equals_laplacian_interior_support(self):
        for g in GRIDS:
            rng = np.random.default_rng(7)
            data = np.zeros(g.shape)
            core = tuple(slice(3, n - 3) for n in g.cells)
            data[core] = rng.normal(size=data[core].shape)
            f = ScalarField(g, data)
            composite = div(grad(f)).data
            direct = laplacian(f, DIRICHLET).data
            assert np.max(np.abs(composite - direct)) <= 1e-12

    def test_div_grad_equals_neumann_laplacian_everywhere(self):
        # with matching ghost conventions the identity holds on all cells
        for g in GRIDS:
            f = ScalarField(g, smooth_scalar(g, np.random.default_rng(11)))
            composite = div(grad(f)).data
            direct = laplacian(f, NEUMANN).data
            scale = max(1.0, np.max(np.abs(direct)))
            assert np.max(np.abs(composite - direct)) <= 1e-13 * scale

    def test_summation_by_parts(self):
        for g in GRIDS:
            for trial in range(100):
                rng = np.random.default_rng(1000 + trial)
                f = ScalarField(g, smooth_scalar(g, rng))
                v = smooth_dirichlet_vector(g, rng)
                lhs = sum(
                    inner(
                        ScalarField(g, grad(f).data[ax]),
                        ScalarField(g, v.data[ax]),
                    )
                    for ax in range(g.dimension)
                )
                rhs = inner(f, div(v))
                scale = max(grids.norm_l2(f) * grids.h1_norm(v), 1e-30)
                assert abs(lhs + rhs) <= 1e-12 * scale

    def test_divergence_theorem(self):
        for g in GRIDS:
            for trial in range(100):
                rng = np.random.default_rng(2000 + trial)
                v = smooth_dirichlet_vector(g, rng)
                assert abs(integrate(div(v))) <= 1e-12 * max(1.0, grids.norm_l2(v))

    def test_neumann_laplacian_conserves_mass(self):
        for g in GRIDS:
            for trial in range(20):
                rng = np.random.default_rng(3000 + trial)
                f = ScalarField(g, rng.normal(size=g.shape))
                assert abs(integrate(laplacian(f, NEUMANN))) <= 1e-12

    def test_laplacian_second_order_on_cosine(self):
        errs = []
        for n in (32, 64, 128):
            g = GridSpec((1.0,), (n,))
            x = g.axes()[0]
            f = scalar_field(g, np.cos(np.pi * x))
            exact = -np.pi**2 * np.cos(np.pi * x)
            errs.append(np.max(np.abs(laplacian(f, NEUMANN).data - exact)))
        orders = [np.log2(errs[i] / errs[i + 1]) for i in range(len(errs) - 1)]
        assert min(orders) >= 1.9


class TestSymGradient:
    def test_zero_velocity(self):
        g = GridSpec((1.0, 1.0), (12, 12))
        D = sym_gradient(vector_field(g, 0.0, 0.0))
        assert np.max(np.abs(D)) == 0.0

    def test_pure_shear(self):
        g = GridSpec((1.0, 1.0), (16, 16))
        _, Y = g.meshgrid()
        u = vector_field(g, Y, np.zeros(g.shape))
        D = sym_gradient(u)
        inner_cells = (slice(1, -1), slice(1, -1))
        assert np.allclose(D[inner_cells + (0, 0)], 0.0, atol=1e-13)
        assert np.allclose(D[inner_cells + (0, 1)], 0.5, atol=1e-13)
        assert np.allclose(D[inner_cells + (1, 0)], 0.5, atol=1e-13)
        assert np.allclose(D[inner_cells + (1, 1)], 0.0, atol=1e-13)

    def test_trace_matches_div(self):
        for g in GRIDS:
            for trial in range(20):
                rng = np.random.default_rng(4000 + trial)
                v = smooth_dirichlet_vector(g, rng)
                D = sym_gradient(v)
                tr = np.trace(D, axis1=-2, axis2=-1)
                assert np.max(np.abs(tr - div(v).data)) <= 1e-12

    def test_symmetry(self):
        g = GridSpec((1.0, 1.0), (12, 10))
        v = smooth_dirichlet_vector(g, np.random.default_rng(5))
        D = sym_gradient(v)
        assert np.max(np.abs(D - np.swapaxes(D, -2, -1))) == 0.0


class TestQuadrature:
    def test_integrate_unit(self):
        g = GridSpec((1.0,), (128,))
        assert integrate(scalar_field(g, 1.0)) == pytest.approx(1.0, abs=1e-14)

    def test_inner_positive(self):
        g = GridSpec((1.0,), (32,))
        for trial in range(10):
            f = ScalarField(g, np.random.default_rng(trial).normal(size=32))
            assert inner(f, f) >= 0.0

    def test_constant_h1_norm(self):
        g = GridSpec((1.0,), (64,))
        f = scalar_field(g, 2.0)
        assert grids.h1_norm(f) == pytest.approx(2.0, rel=1e-12)


class TestMatrices:
    def test_neumann_matrix_mass_and_symmetry(self):
        for g in GRIDS:
            L = grids.neumann_laplacian_matrix(g)
            ones = np.ones(L.shape[0])
            assert np.max(np.abs(L.T @ ones)) <= 1e-12  # column sums: conservation
            assert abs(L - L.T).max() <= 1e-12

    def test_variable_unit_coefficient_matches_plain(self):
        for g in GRIDS:
            A = grids.variable_diffusion_matrix(g, np.ones(g.shape), NEUMANN)
            B = grids.neumann_laplacian_matrix(g)
            assert abs(A - B).max() <= 1e-12

    def test_centered_matrix_matches_operator(self):
        for g in GRIDS:
            rng = np.random.default_rng(17)
            f = rng.normal(size=g.shape)
            for ax in range(g.dimension):
                for bc in (NEUMANN, DIRICHLET):
                    Dm = grids.centered_derivative_matrix(g, ax, bc)
                    direct = grids.partial(f, ax, g, bc)
                    assert np.allclose(
                        (Dm @ f.ravel()).reshape(g.shape), direct, atol=1e-13
                    )

    def test_dirichlet_matrix_negative_definite(self):
        g = GridSpec((1.0,), (32,))
        L = grids.dirichlet_laplacian_matrix(g).toarray()
        eig = np.linalg.eigvalsh(0.5 * (L + L.T))
        assert np.max(eig) < 0.0


class TestSerialization:
    def test_round_trip_1d(self, tmp_path):
        g = GridSpec((2.5,), (16,))
        f = ScalarField(g, np.random.default_rng(0).normal(size=16))
        p = tmp_path / "f.nsf"
        grids.save_field(p, f)
        back = grids.load_field(p)
        assert isinstance(back, ScalarField)
        assert back.grid == g
        assert np.array_equal(back.data, f.data)

    def test_round_trip_2d_vector(self, tmp_path):
        g = GridSpec((1.0, 2.0), (8, 12))
        v = VectorField(g, np.random.default_rng(1).normal(size=(2, 8, 12)))
        p = tmp_path / "v.nsf"
        grids.save_field(p, v)
        back = grids.load_field(p)
        assert isinstance(back, VectorField)
        assert back.grid == g
        assert np.array_equal(back.data, v.data)

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "junk.nsf"
        p.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError):
            grids.load_field(p)

    def test_csv_export(self, tmp_path):
        g = GridSpec((1.0,), (8,))
        f = scalar_field(g, 0.5)
        p = tmp_path / "f.csv"
        grids.field_to_csv(p, f)
        text = p.read_text()
        lines = [ln for ln in text.splitlines() if ln]
        assert len(lines) == 9  # header + 8 cells
        assert lines[0].startswith("x")
