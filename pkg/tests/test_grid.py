"""Mesh, field, quadrature, and file-format tests.

Expected values here are computed by hand from the documented
conventions (cell-center quadrature, four-corner cell averages), not by
running the code first: the midpoint rule integrates polynomials with a
closed-form error term, which gives exact oracles like
integral(x^2) = 1/3 - h^2/12.
"""

import math

import numpy as np
import pytest

from viscotherm.errors import (
    InvalidArgument,
    InvalidExponent,
    InvalidMesh,
    InvalidRange,
    InvalidTruncation,
    MeshMismatch,
)
from viscotherm.grid import (
    CellVectorField,
    Mesh,
    ScalarField,
    build_mesh,
    gradient,
    integrate,
    level_set_measure,
    lq_norm,
    read_field,
    truncate_field,
    w1p_seminorm,
    write_field,
)


def field_from(mesh, fn):
    return ScalarField.from_function(mesh, fn)


class TestMesh:
    def test_counts_n4(self):
        mesh = build_mesh(4)
        assert mesh.node_count == 25
        assert mesh.h == 0.25

    def test_counts_n64(self):
        assert build_mesh(64).node_count == 65 * 65

    def test_too_coarse(self):
        with pytest.raises(InvalidMesh):
            build_mesh(2)

    def test_non_integer(self):
        with pytest.raises(InvalidMesh):
            build_mesh(4.5)

    def test_non_square(self):
        with pytest.raises(InvalidMesh):
            Mesh(4, 5)

    def test_coordinates(self):
        mesh = build_mesh(4)
        assert np.allclose(mesh.node_coordinates(), [0, 0.25, 0.5, 0.75, 1.0])
        assert np.allclose(mesh.cell_centers(), [0.125, 0.375, 0.625, 0.875])


class TestScalarField:
    def test_shape_check(self):
        mesh = build_mesh(4)
        with pytest.raises(InvalidMesh):
            ScalarField(mesh, np.zeros((4, 4)))

    def test_from_function_broadcasts_constant(self):
        mesh = build_mesh(4)
        f = ScalarField.from_function(mesh, lambda x, y: 2.0)
        assert np.array_equal(f.values, np.full((5, 5), 2.0))

    def test_cell_values_of_bilinear_product(self):
        # four-corner average of x*y at a cell center is exactly
        # x_c*y_c + h^2/4 (expand (x +- h/2)(y +- h/2) and average)
        mesh = build_mesh(8)
        f = field_from(mesh, lambda x, y: x * y)
        Xc, Yc = mesh.cell_grid()
        expected = Xc * Yc + mesh.h**2 / 4.0
        assert np.max(np.abs(f.cell_values() - expected)) < 1e-15

    def test_arithmetic(self):
        mesh = build_mesh(4)
        a = field_from(mesh, lambda x, y: x)
        b = field_from(mesh, lambda x, y: y)
        assert np.allclose((a + b).values, a.values + b.values)
        assert np.allclose((a - b).values, a.values - b.values)
        assert np.allclose((2.0 * a).values, 2.0 * a.values)
        assert np.allclose((-a).values, -a.values)

    def test_mesh_mismatch(self):
        a = ScalarField.zeros(build_mesh(4))
        b = ScalarField.zeros(build_mesh(8))
        with pytest.raises(MeshMismatch):
            a + b

    def test_zero_boundary(self):
        mesh = build_mesh(4)
        f = ScalarField.constant(mesh, 3.0).zero_boundary()
        assert np.all(f.values[0, :] == 0.0)
        assert np.all(f.values[-1, :] == 0.0)
        assert np.all(f.values[:, 0] == 0.0)
        assert np.all(f.values[:, -1] == 0.0)
        assert np.all(f.values[1:-1, 1:-1] == 3.0)

    def test_linf_min(self):
        mesh = build_mesh(4)
        f = field_from(mesh, lambda x, y: x - y)
        assert f.linf() == 1.0
        assert f.min() == -1.0


class TestGradient:
    def test_affine_exact(self):
        mesh = build_mesh(8)
        g = gradient(field_from(mesh, lambda x, y: x))
        assert np.max(np.abs(g.x - 1.0)) == 0.0
        assert np.max(np.abs(g.y)) == 0.0

    def test_constant_zero(self):
        mesh = build_mesh(8)
        g = gradient(ScalarField.constant(mesh, 5.0))
        assert np.max(np.abs(g.x)) == 0.0
        assert np.max(np.abs(g.y)) == 0.0

    def test_sine_refinement(self):
        errors = []
        for n in (16, 32, 64):
            mesh = build_mesh(n)
            g = gradient(field_from(
                mesh, lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)))
            Xc, Yc = mesh.cell_grid()
            exact_x = np.pi * np.cos(np.pi * Xc) * np.sin(np.pi * Yc)
            exact_y = np.pi * np.sin(np.pi * Xc) * np.cos(np.pi * Yc)
            errors.append(max(np.max(np.abs(g.x - exact_x)),
                              np.max(np.abs(g.y - exact_y))))
        assert errors[1] <= 0.6 * errors[0]
        assert errors[2] <= 0.6 * errors[1]

    def test_cell_vector_shape_check(self):
        mesh = build_mesh(4)
        with pytest.raises(InvalidMesh):
            CellVectorField(mesh, np.zeros((4, 4)), np.zeros((3, 4)))


class TestIntegrate:
    def test_constant_one(self):
        mesh = build_mesh(8)
        assert integrate(mesh, np.ones((8, 8))) == pytest.approx(1.0, abs=1e-15)

    def test_zero(self):
        mesh = build_mesh(8)
        assert integrate(mesh, np.zeros((8, 8))) == 0.0

    def test_product_xy(self):
        # cell average of the xy interpolant is x_c*y_c + h^2/4, and the
        # midpoint sums of x_c and y_c are exactly 1/2 each, so the
        # integral is exactly 1/4 + h^2/4
        mesh = build_mesh(16)
        f = field_from(mesh, lambda x, y: x * y)
        value = integrate(mesh, f.cell_values())
        assert value == pytest.approx(0.25 + mesh.h**2 / 4.0, abs=1e-15)

    def test_shape_check(self):
        with pytest.raises(InvalidMesh):
            integrate(build_mesh(8), np.ones((7, 8)))


class TestLqNorm:
    def test_constant_any_exponent(self):
        mesh = build_mesh(8)
        two = ScalarField.constant(mesh, 2.0)
        assert lq_norm(two, 1.0) == pytest.approx(2.0, abs=1e-12)
        assert lq_norm(two, 3.0) == pytest.approx(2.0, abs=1e-12)

    def test_linear_field_l2(self):
        # midpoint rule on x^2 has the closed-form value 1/3 - h^2/12
        mesh = build_mesh(16)
        f = field_from(mesh, lambda x, y: x)
        expected = math.sqrt(1.0 / 3.0 - mesh.h**2 / 12.0)
        assert lq_norm(f, 2.0) == pytest.approx(expected, abs=1e-14)

    def test_exponent_validation(self):
        f = ScalarField.zeros(build_mesh(8))
        with pytest.raises(InvalidExponent):
            lq_norm(f, 0.5)


class TestW1pSeminorm:
    def test_unit_slope(self):
        mesh = build_mesh(8)
        f = field_from(mesh, lambda x, y: x)
        assert w1p_seminorm(f, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_zero_field(self):
        assert w1p_seminorm(ScalarField.zeros(build_mesh(8)), 1.5) == 0.0

    def test_p2_matches_energy(self):
        mesh = build_mesh(8)
        f = field_from(mesh, lambda x, y: np.sin(np.pi * x) * y)
        energy = integrate(mesh, gradient(f).magnitude_squared())
        assert w1p_seminorm(f, 2.0) == pytest.approx(math.sqrt(energy), rel=1e-14)

    def test_exponent_validation(self):
        f = ScalarField.zeros(build_mesh(8))
        with pytest.raises(InvalidExponent):
            w1p_seminorm(f, 0.5)
        with pytest.raises(InvalidExponent):
            w1p_seminorm(f, 2.5)


class TestTruncate:
    def test_clips_both_sides(self):
        mesh = build_mesh(4)
        f = ScalarField(mesh, np.full((5, 5), 3.0))
        assert np.all(truncate_field(f, 2.0).values == 2.0)
        f = ScalarField(mesh, np.full((5, 5), -5.0))
        assert np.all(truncate_field(f, 2.0).values == -2.0)

    def test_identity_inside_range(self):
        mesh = build_mesh(8)
        f = field_from(mesh, lambda x, y: x - y)
        out = truncate_field(f, 1.5)
        assert np.array_equal(out.values, f.values)

    def test_idempotent(self):
        mesh = build_mesh(8)
        f = field_from(mesh, lambda x, y: 4.0 * np.sin(7 * x * y))
        once = truncate_field(f, 1.0)
        twice = truncate_field(once, 1.0)
        assert np.array_equal(once.values, twice.values)

    def test_height_validation(self):
        f = ScalarField.zeros(build_mesh(4))
        with pytest.raises(InvalidTruncation):
            truncate_field(f, 0.0)
        with pytest.raises(InvalidTruncation):
            truncate_field(f, -1.0)


class TestLevelSetMeasure:
    def test_empty_set(self):
        mesh = build_mesh(8)
        assert level_set_measure(ScalarField.constant(mesh, 0.5), 1.0, 2.0) == 0.0

    def test_whole_domain(self):
        mesh = build_mesh(8)
        m = level_set_measure(ScalarField.constant(mesh, 1.5), 1.0, 2.0)
        assert m == pytest.approx(1.0, abs=1e-15)

    def test_strip(self):
        # 1 < 3x < 2 is a strip of width exactly 1/3; cell membership by
        # center value resolves it to within one cell layer per side
        mesh = build_mesh(16)
        f = field_from(mesh, lambda x, y: 3.0 * x)
        m = level_set_measure(f, 1.0, 2.0)
        assert abs(m - 1.0 / 3.0) <= mesh.h

    def test_range_validation(self):
        f = ScalarField.zeros(build_mesh(8))
        with pytest.raises(InvalidRange):
            level_set_measure(f, 2.0, 1.0)


class TestFieldIO:
    def test_round_trip_bitwise(self, tmp_path):
        mesh = build_mesh(8)
        rng = np.random.default_rng(3)
        f = ScalarField(mesh, rng.standard_normal((9, 9)) * 1e3)
        path = tmp_path / "field.csv"
        write_field(path, f)
        back = read_field(path)
        assert back.mesh == mesh
        assert np.array_equal(back.values, f.values)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("not a header\n")
        with pytest.raises(InvalidArgument):
            read_field(path)

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("# scalar_field nx=4 ny=4\n0,0,0.0\n")
        with pytest.raises(InvalidArgument):
            read_field(path)

    def test_missing_nodes(self, tmp_path):
        path = tmp_path / "partial.csv"
        path.write_text("# scalar_field nx=4 ny=4\n0,0,0.0,0.0,1.0\n")
        with pytest.raises(InvalidArgument):
            read_field(path)
