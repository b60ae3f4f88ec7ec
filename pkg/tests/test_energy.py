import numpy as np
import pytest

from choquard import (Field, SingularityError, energy, gradient_field,
                      singular_integral, weak_residual)
from choquard.energy import default_floor
from choquard.fiber import field_scalars
from choquard.grid import zeros_field

from conftest import rand_field


def test_singular_integral_zero_and_constant(box17):
    assert singular_integral(zeros_field(box17), 0.5) == 0.0
    c = 2.0
    u = Field(box17, np.full(box17.m, c))
    expected = c ** 0.5 * float(box17.mask.sum()) * box17.cell_volume
    assert singular_integral(u, 0.5) == pytest.approx(expected, rel=1e-13)


def test_singular_integral_homogeneity(ball9):
    u = rand_field(ball9, 1)
    s = 2.4
    assert singular_integral(s * u, 0.5) == pytest.approx(
        s ** 0.5 * singular_integral(u, 0.5), rel=1e-13)


def test_singular_integral_rejects_bad_q(ball9):
    with pytest.raises(SingularityError):
        singular_integral(rand_field(ball9, 1), 1.5)


def test_energy_zero_field(ball9, kt9, exps3):
    eb = energy(zeros_field(ball9), 0.5, exps3, kt9)
    assert (eb.kinetic, eb.singular, eb.nonlocal_, eb.total) == (0, 0, 0, 0)


def test_energy_decomposition_signs(ball13, kt13, exps3):
    u = rand_field(ball13, 2)
    eb = energy(u, 0.7, exps3, kt13)
    assert eb.kinetic >= 0 and eb.singular >= 0 and eb.nonlocal_ >= 0
    assert eb.total == eb.kinetic - eb.singular - eb.nonlocal_


def test_energy_matches_fiber_value(ball13, kt13, exps3):
    u = rand_field(ball13, 3)
    lam = 0.4
    sc = field_scalars(u, exps3, kt13)
    for t in (0.3, 1.0, 2.7):
        eb = energy(t * u, lam, exps3, kt13)
        assert eb.total == pytest.approx(float(sc.phi(t, lam)), rel=1e-12)


def test_energy_strictly_monotone_in_lambda(ball9, kt9, exps3):
    u = rand_field(ball9, 4)
    assert energy(u, 0.9, exps3, kt9).total < energy(u, 0.3, exps3, kt9).total


def test_weak_residual_zero_test_field(ball9, kt9, exps3):
    u = rand_field(ball9, 5)
    assert weak_residual(u, zeros_field(ball9), 0.5, exps3, kt9,
                         floor=default_floor(u)) == 0.0


def test_weak_residual_linear_in_test_field(ball13, kt13, exps3):
    u = rand_field(ball13, 6)
    w1 = rand_field(ball13, 7, positive=False)
    w2 = rand_field(ball13, 8, positive=False)
    fl = default_floor(u)
    a, b = 1.7, -0.3
    combo = Field(ball13, a * w1.values + b * w2.values)
    lhs = weak_residual(u, combo, 0.5, exps3, kt13, floor=fl)
    rhs = (a * weak_residual(u, w1, 0.5, exps3, kt13, floor=fl)
           + b * weak_residual(u, w2, 0.5, exps3, kt13, floor=fl))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_weak_residual_flags_nonpositive_without_floor(ball9, kt9, exps3):
    vals = np.zeros(ball9.m)
    vals[4, 4, 4] = 1.0  # zero at other masked nodes
    u = Field(ball9, vals)
    w = rand_field(ball9, 9)
    with pytest.raises(SingularityError):
        weak_residual(u, w, 0.5, exps3, kt9, floor=0.0)


def test_gradient_requires_floor(ball9, kt9, exps3):
    with pytest.raises(SingularityError):
        gradient_field(rand_field(ball9, 10), 0.5, exps3, kt9, floor=0.0)


def test_gradient_weak_residual_consistency(ball13, kt13, exps3):
    # summation-by-parts exactness of the stencil
    u = rand_field(ball13, 11)
    w = rand_field(ball13, 12, positive=False)
    fl = default_floor(u)
    g = gradient_field(u, 0.5, exps3, kt13, floor=fl)
    inner = float(np.sum(g.values * w.values)) * ball13.cell_volume
    assert inner == pytest.approx(
        weak_residual(u, w, 0.5, exps3, kt13, floor=fl), rel=1e-10)


@pytest.mark.parametrize("seed", range(4))
def test_gradient_finite_difference(ball13, kt13, exps3, seed):
    u = rand_field(ball13, 100 + seed)
    w = rand_field(ball13, 200 + seed, positive=False)
    lam = 0.4
    fl = default_floor(u)
    g = gradient_field(u, lam, exps3, kt13, floor=fl)
    inner = float(np.sum(g.values * w.values)) * ball13.cell_volume
    eps = 1e-6
    up = Field(ball13, u.values + eps * w.values)
    um = Field(ball13, u.values - eps * w.values)
    fd = (energy(up, lam, exps3, kt13).total
          - energy(um, lam, exps3, kt13).total) / (2.0 * eps)
    assert inner == pytest.approx(fd, rel=1e-5)


def test_laplacian_eigenfunction():
    # -lap of the sine product reproduces 3*pi^2 times the mode, O(h^2)
    from choquard import build_grid
    from choquard.grid import neg_laplacian

    g = build_grid("box", (1.0, 1.0, 1.0), (33, 33, 33))
    mesh = g.coord_mesh()
    vals = np.sin(np.pi * mesh[0]) * np.sin(np.pi * mesh[1]) * np.sin(np.pi * mesh[2])
    u = Field(g, vals)
    lap = neg_laplacian(u)
    sel = g.mask & (np.abs(u.values) > 0.1)
    ratio = lap[sel] / u.values[sel]
    assert np.max(np.abs(ratio - 3.0 * np.pi ** 2)) <= 3.0 * np.pi ** 2 * (
        np.pi * g.h[0]) ** 2
