"""Vector primitives, quadrature grids, curve projection, and the curve file format."""

import numpy as np
import pytest

from pcasmooth.hilbert import (
    AmbientSpace,
    CurveGrid,
    as_vector,
    curve_to_coeffs,
    fourier_basis,
    inner_product,
    norm,
    read_curves,
    write_curves,
)


def test_inner_product_orthonormal_axes():
    assert inner_product((1, 0, 0), (1, 0, 0)) == 1.0
    assert inner_product((1, 0, 0), (0, 1, 0)) == 0.0


def test_inner_product_arithmetic():
    assert inner_product((1, 2, 0), (3, 4, 0)) == 11.0


def test_inner_product_symmetric_and_bilinear():
    rng = np.random.default_rng(7)
    for _ in range(200):
        u, v = rng.normal(size=(2, 6))
        a, b = rng.normal(size=2)
        assert inner_product(u, v) == pytest.approx(inner_product(v, u), abs=1e-12)
        assert inner_product(a * u + b * v, v) == pytest.approx(
            a * inner_product(u, v) + b * inner_product(v, v), rel=1e-10, abs=1e-12
        )


def test_inner_product_mismatch_reports_both_lengths():
    with pytest.raises(ValueError, match="3 vs 4"):
        inner_product((1, 0, 0), (1, 0, 0, 0))


def test_norm_examples():
    assert norm((0, 0, 0)) == 0.0
    assert norm((3, 4, 0)) == 5.0
    assert norm((1, 1, 1, 1)) == 2.0


def test_as_vector_validation():
    with pytest.raises(ValueError, match="1-d"):
        as_vector([[1.0, 2.0]])
    with pytest.raises(ValueError, match="nonempty"):
        as_vector([])
    with pytest.raises(ValueError, match="index 1"):
        as_vector([0.0, np.nan, 1.0])
    with pytest.raises(ValueError, match="length 2, expected 3"):
        as_vector([1.0, 2.0], J=3)


def test_ambient_space_validation():
    assert AmbientSpace(3).J == 3
    with pytest.raises(ValueError, match=">= 3"):
        AmbientSpace(2)
    with pytest.raises(TypeError):
        AmbientSpace(3.5)


def test_cauchy_schwarz_property():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        J = int(rng.integers(3, 12))
        u = rng.normal(size=J) * rng.exponential()
        v = rng.normal(size=J) * rng.exponential()
        assert abs(inner_product(u, v)) <= norm(u) * norm(v) + 1e-12


def test_parallelogram_law_property():
    rng = np.random.default_rng(13)
    for _ in range(1000):
        J = int(rng.integers(3, 12))
        u = rng.normal(size=J)
        v = rng.normal(size=J)
        left = norm(u + v) ** 2 + norm(u - v) ** 2
        right = 2 * norm(u) ** 2 + 2 * norm(v) ** 2
        assert left == pytest.approx(right, rel=1e-10)


# CurveGrid ----------------------------------------------------------------


def test_trapezoid_weights_sum_to_interval_length():
    rng = np.random.default_rng(17)
    for _ in range(200):
        m = int(rng.integers(2, 40))
        steps = rng.uniform(0.01, 1.0, m - 1)
        pts = rng.uniform(-1.0, 1.0) + np.concatenate([[0.0], np.cumsum(steps)])
        grid = CurveGrid.trapezoid(pts)
        length = pts[-1] - pts[0]
        assert grid.quadrature_weights.sum() == pytest.approx(length, rel=1e-12)


def test_uniform_periodic_weights():
    grid = CurveGrid.uniform_periodic(8)
    assert grid.size == 8
    assert np.array_equal(grid.quadrature_weights, np.full(8, 0.125))
    assert grid.grid_points[0] == 0.0 and grid.grid_points[-1] == 0.875


def test_grid_validation_errors():
    with pytest.raises(ValueError, match="between indices 1 and 2"):
        CurveGrid(np.array([0.0, 0.5, 0.5]), np.full(3, 0.1))
    with pytest.raises(ValueError, match="weight 1 is"):
        CurveGrid(np.array([0.0, 0.5, 1.0]), np.array([0.1, -0.1, 0.1]))
    with pytest.raises(ValueError, match="3 points but 2 weights"):
        CurveGrid(np.array([0.0, 0.5, 1.0]), np.array([0.1, 0.1]))
    with pytest.raises(ValueError, match="at least 2"):
        CurveGrid.uniform_periodic(1)
    with pytest.raises(ValueError, match="a < b"):
        CurveGrid.uniform_periodic(4, interval=(1.0, 0.0))


# Curve projection ---------------------------------------------------------


def test_fourier_basis_is_orthonormal_on_periodic_grid():
    grid = CurveGrid.uniform_periodic(256)
    basis = fourier_basis(grid.grid_points, 25)
    gram = (basis * grid.quadrature_weights) @ basis.T
    assert np.max(np.abs(gram - np.eye(25))) < 1e-12


def test_curve_to_coeffs_recovers_single_basis_function():
    grid = CurveGrid.uniform_periodic(256)
    basis = fourier_basis(grid.grid_points, 7)
    coeffs, residual = curve_to_coeffs(basis[0], basis, grid)
    expect = np.zeros(7)
    expect[0] = 1.0
    np.testing.assert_allclose(coeffs, expect, atol=1e-12)
    assert residual == pytest.approx(0.0, abs=1e-10)


def test_curve_to_coeffs_zero_curve():
    grid = CurveGrid.uniform_periodic(64)
    basis = fourier_basis(grid.grid_points, 5)
    coeffs, residual = curve_to_coeffs(np.zeros(64), basis, grid)
    assert np.array_equal(coeffs, np.zeros(5))
    assert residual == 0.0


def test_curve_to_coeffs_two_term_combination():
    # 2*basis_0 + 3*basis_1 tabulated on a 256-point grid over [0, 1)
    grid = CurveGrid.uniform_periodic(256)
    basis = fourier_basis(grid.grid_points, 10)
    curve = 2.0 * basis[0] + 3.0 * basis[1]
    coeffs, residual = curve_to_coeffs(curve, basis, grid)
    expect = np.zeros(10)
    expect[0], expect[1] = 2.0, 3.0
    np.testing.assert_allclose(coeffs, expect, atol=1e-6)
    assert residual < 1e-6


def test_curve_to_coeffs_batch_shape():
    grid = CurveGrid.uniform_periodic(128)
    basis = fourier_basis(grid.grid_points, 6)
    rng = np.random.default_rng(19)
    c = rng.normal(size=(4, 6))
    coeffs, residual = curve_to_coeffs(c @ basis, basis, grid)
    assert coeffs.shape == (4, 6) and residual.shape == (4,)
    np.testing.assert_allclose(coeffs, c, atol=1e-12)


def test_curve_to_coeffs_rejects_non_orthonormal_basis():
    grid = CurveGrid.uniform_periodic(64)
    basis = fourier_basis(grid.grid_points, 4)
    basis = np.vstack([basis[0], basis[0], basis[2], basis[3]])  # duplicated row
    with pytest.raises(ValueError, match=r"Gram\[0,1\]"):
        curve_to_coeffs(np.zeros(64), basis, grid)


def test_curve_to_coeffs_grid_mismatch():
    grid = CurveGrid.uniform_periodic(64)
    basis = fourier_basis(CurveGrid.uniform_periodic(32).grid_points, 4)
    with pytest.raises(ValueError, match="32 points but grid has 64"):
        curve_to_coeffs(np.zeros(64), basis, grid)
    basis = fourier_basis(grid.grid_points, 4)
    with pytest.raises(ValueError, match="sampled on 32 points"):
        curve_to_coeffs(np.zeros(32), basis, grid)


def test_coefficient_norm_matches_quadrature_norm():
    # Band-limited curves: coefficient-space norm vs direct quadrature norm.
    rng = np.random.default_rng(23)
    grid = CurveGrid.uniform_periodic(512)
    basis = fourier_basis(grid.grid_points, 15)
    w = grid.quadrature_weights
    for _ in range(50):
        c = rng.normal(size=15)
        curve = c @ basis
        coeffs, _ = curve_to_coeffs(curve, basis, grid)
        quad_norm = float(np.sqrt(np.sum(w * curve**2)))
        assert norm(coeffs) == pytest.approx(quad_norm, rel=1e-6)


def test_trapezoid_grid_projection_on_full_period():
    # Inclusive endpoint grid: trapezoid weights reduce to the periodic rule
    # for full-period trigonometric curves.
    pts = np.linspace(0.0, 1.0, 257)
    grid = CurveGrid.trapezoid(pts)
    basis = fourier_basis(pts, 9)
    c = np.arange(1.0, 10.0)
    coeffs, residual = curve_to_coeffs(c @ basis, basis, grid)
    np.testing.assert_allclose(coeffs, c, atol=1e-9)
    assert residual < 1e-9


# Curve file format --------------------------------------------------------


def test_curve_file_round_trip_exact(tmp_path):
    rng = np.random.default_rng(29)
    pts = np.linspace(0.0, 1.0, 17)
    curves = rng.normal(size=(5, 17))
    path = tmp_path / "curves.csv"
    write_curves(path, pts, curves)
    back_pts, back = read_curves(path)
    assert np.array_equal(back_pts, pts)
    assert np.array_equal(back, curves)


def test_write_curves_single_row(tmp_path):
    path = tmp_path / "one.csv"
    write_curves(path, [0.0, 0.5, 1.0], [1.0, 2.0, 3.0])
    _, back = read_curves(path)
    assert back.shape == (1, 3)


def test_write_curves_shape_mismatch(tmp_path):
    with pytest.raises(ValueError, match="2 samples but grid has 3"):
        write_curves(tmp_path / "bad.csv", [0.0, 0.5, 1.0], [[1.0, 2.0]])


def test_read_curves_reports_row_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.0,0.5,1.0\n1.0,oops,3.0\n")
    with pytest.raises(ValueError, match="row 1, column 1"):
        read_curves(path)


def test_read_curves_reports_wrong_field_count(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("0.0,0.5,1.0\n1.0,2.0,3.0\n4.0,5.0\n")
    with pytest.raises(ValueError, match="row 2: expected 3 fields, got 2"):
        read_curves(path)


def test_read_curves_header_and_empty_errors(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(ValueError, match="empty"):
        read_curves(empty)
    no_rows = tmp_path / "norows.csv"
    no_rows.write_text("0.0,0.5,1.0\n")
    with pytest.raises(ValueError, match="no curve rows"):
        read_curves(no_rows)
    bad_header = tmp_path / "header.csv"
    bad_header.write_text("0.0,0.5,0.25\n1.0,2.0,3.0\n")
    with pytest.raises(ValueError, match="strictly increasing"):
        read_curves(bad_header)
