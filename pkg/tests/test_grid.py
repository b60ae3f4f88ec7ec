import numpy as np
import pytest

from choquard import (Field, GridError, build_grid, grad_inner, h1_seminorm_sq,
                      lp_integral, neg_laplacian, read_field_csv,
                      write_field_csv)
from choquard.grid import stiffness_matrix, zeros_field

from conftest import rand_field


def test_unit_cube_interior_count():
    g = build_grid("box", (1.0, 1.0, 1.0), (9, 9, 9))
    assert int(g.mask.sum()) == 7 ** 3
    assert g.h == (0.125, 0.125, 0.125)


def test_ball_delta_at_origin():
    g = build_grid("ball", (2.0, 2.0, 2.0), (17, 17, 17))
    center = (8, 8, 8)
    assert g.mask[center]
    assert g.delta[center] == pytest.approx(1.0)


@pytest.mark.parametrize("m", [(9, 9), (9,)])
def test_low_dimension_rejected(m):
    with pytest.raises(GridError):
        build_grid("box", (1.0,) * len(m), m)


def test_small_m_rejected():
    with pytest.raises(GridError):
        build_grid("box", (1.0, 1.0, 1.0), (4, 9, 9))


def test_bad_extent_rejected():
    with pytest.raises(GridError):
        build_grid("box", (1.0, -1.0, 1.0), (9, 9, 9))


def test_unknown_shape_rejected():
    with pytest.raises(GridError):
        build_grid("annulus", (1.0, 1.0, 1.0), (9, 9, 9))


@pytest.mark.parametrize("shape,extent", [("box", (1.0, 1.0, 1.0)),
                                          ("ball", (2.0, 2.0, 2.0))])
def test_delta_matches_analytic_distance(shape, extent):
    g = build_grid(shape, extent, (17, 17, 17))
    mesh = g.coord_mesh()
    if shape == "ball":
        r = np.sqrt(sum(c * c for c in mesh))
        analytic = g.radius - r
    else:
        analytic = np.minimum.reduce(
            [np.minimum(mesh[a], extent[a] - mesh[a]) for a in range(3)])
    err = np.abs(g.delta - analytic)[g.mask]
    assert np.max(err) <= min(g.h) / 2.0 + 1e-12
    assert np.all(g.delta >= 0.0)
    assert np.all(g.delta[~g.mask] == 0.0)


def test_field_zeroed_outside_mask(ball9):
    vals = np.ones(ball9.m)
    f = Field(ball9, vals)
    assert np.all(f.values[~ball9.mask] == 0.0)


def test_field_rejects_nan(ball9):
    vals = np.zeros(ball9.m)
    vals[4, 4, 4] = np.nan
    with pytest.raises(GridError):
        Field(ball9, vals)


def test_seminorm_zero_field(ball9):
    assert h1_seminorm_sq(zeros_field(ball9)) == 0.0


def test_seminorm_quadratic_scaling(ball9):
    u = rand_field(ball9, 1)
    assert h1_seminorm_sq(2.0 * u) == pytest.approx(4.0 * h1_seminorm_sq(u),
                                                    rel=1e-14)


def test_seminorm_eigenmode_value():
    # first Dirichlet mode on the unit cube: integral of |grad u|^2 is 3*pi^2/8
    g = build_grid("box", (1.0, 1.0, 1.0), (65, 65, 65))
    mesh = g.coord_mesh()
    vals = np.sin(np.pi * mesh[0]) * np.sin(np.pi * mesh[1]) * np.sin(np.pi * mesh[2])
    u = Field(g, vals)
    assert h1_seminorm_sq(u) == pytest.approx(3.0 * np.pi ** 2 / 8.0, rel=0.01)


def test_lp_constant_field_measures_domain(box17):
    u = Field(box17, np.ones(box17.m))
    # interior-node midpoint sum of the unit cube
    assert lp_integral(u, 2.0) == pytest.approx(1.0, abs=0.2)
    assert lp_integral(u, 2.0) == float(box17.mask.sum()) * box17.cell_volume


def test_lp_homogeneity_exact(ball9):
    u = rand_field(ball9, 2)
    s = 1.7
    assert lp_integral(s * u, 2.5) == pytest.approx(
        s ** 2.5 * lp_integral(u, 2.5), rel=1e-13)


def test_lp_rejects_nonpositive_exponent(ball9):
    with pytest.raises(GridError):
        lp_integral(rand_field(ball9, 3), 0.0)


def test_grad_inner_symmetric_and_diagonal(ball13):
    u = rand_field(ball13, 4)
    w = rand_field(ball13, 5, positive=False)
    assert grad_inner(u, w) == grad_inner(w, u)
    assert grad_inner(u, u) == pytest.approx(h1_seminorm_sq(u), rel=1e-14)
    assert grad_inner(u, zeros_field(ball13)) == 0.0


def test_grad_inner_polarization(ball13):
    u = rand_field(ball13, 6)
    w = rand_field(ball13, 7, positive=False)
    pol = (h1_seminorm_sq(u + w) - h1_seminorm_sq(u - w)) / 4.0
    assert grad_inner(u, w) == pytest.approx(pol, rel=1e-12)


def test_grad_inner_grid_mismatch(ball9, ball13):
    with pytest.raises(GridError):
        grad_inner(rand_field(ball9, 8), rand_field(ball13, 8))


def test_poincare_quotient_stable_under_refinement():
    # smooth fixed profile: quotient must converge, not drift with h
    consts = []
    for m in (9, 17, 33):
        g = build_grid("ball", (2.0, 2.0, 2.0), (m, m, m))
        axes = g.axis_coords()
        r2 = sum(np.square(c)[(slice(None),) + (None,) * (2 - a)]
                 for a, c in enumerate(axes))
        u = Field(g, np.maximum(1.0 - r2, 0.0))
        consts.append(lp_integral(u, 2.0) / h1_seminorm_sq(u))
    assert max(consts) <= 1.3 * min(consts)


def test_neg_laplacian_summation_by_parts(ball13):
    u = rand_field(ball13, 9)
    w = rand_field(ball13, 10, positive=False)
    lhs = float(np.sum(neg_laplacian(u) * w.values)) * ball13.cell_volume
    assert lhs == pytest.approx(grad_inner(u, w), rel=1e-12)


def test_stiffness_matrix_matches_neg_laplacian(ball9):
    u = rand_field(ball9, 11)
    A, _ = stiffness_matrix(ball9)
    via_matrix = A @ u.values[ball9.mask]
    assert np.allclose(via_matrix, neg_laplacian(u)[ball9.mask], rtol=1e-13)


def test_field_csv_roundtrip(tmp_path, ball9):
    u = rand_field(ball9, 12)
    path = tmp_path / "field.csv"
    write_field_csv(u, path)
    header = path.read_text().splitlines()[0]
    assert header == "i,j,k,x,y,z,value"
    back = read_field_csv(ball9, path)
    assert np.array_equal(back.values, u.values)
