"""Riesz-kernel machinery: exponent bookkeeping, tabulated singular kernel,
the nonlocal potential and the Choquard double integral."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve

from .grid import DomainGrid, Field


class ExponentError(ValueError):
    pass


@dataclass(frozen=True)
class Exponents:
    n: int
    mu: float
    q: float
    two_star_mu: float
    two_star: float
    p_growth: float


def make_exponents(n: int, mu: float, q: float) -> Exponents:
    n = int(n)
    if n <= 2:
        raise ExponentError(f"n={n} violates n > 2")
    if not (0.0 < mu < n):
        raise ExponentError(f"mu={mu} violates 0 < mu < n (n={n})")
    if not (0.0 < q < 1.0):
        raise ExponentError(f"q={q} violates 0 < q < 1")
    two_star_mu = (2.0 * n - mu) / (n - 2.0)
    two_star = 2.0 * n / (n - 2.0)
    return Exponents(n=n, mu=float(mu), q=float(q), two_star_mu=two_star_mu,
                     two_star=two_star, p_growth=2.0 * two_star_mu)


@dataclass(frozen=True)
class KernelTable:
    grid: DomainGrid
    mu: float
    weights: np.ndarray
    self_weight: float


def _cell_average_kernel(h, mu: float, points: int = 64) -> float:
    """Gauss-Legendre cell average of |z|^(-mu) over the central cell.

    Integrates one corner octant (where the singularity sits at a domain
    corner, which Gauss-Legendre handles far better than an interior one)
    and multiplies by 2^n."""
    nodes, wts = leggauss(points)
    axes_nodes = [0.25 * ha * (nodes + 1.0) for ha in h]
    axes_wts = [0.25 * ha * wts for ha in h]
    mesh = np.meshgrid(*axes_nodes, indexing="ij")
    r2 = sum(c * c for c in mesh)
    integrand = r2 ** (-mu / 2.0)
    wmesh = np.meshgrid(*axes_wts, indexing="ij")
    wprod = np.ones_like(integrand)
    for wm in wmesh:
        wprod = wprod * wm
    integral = 2.0 ** len(h) * float(np.sum(integrand * wprod))
    return integral / float(np.prod(h))


def kernel_table(grid: DomainGrid, mu: float, quad_points: int = 64) -> KernelTable:
    if not (0.0 < mu < grid.n):
        raise ExponentError(f"mu={mu} violates 0 < mu < n (n={grid.n})")
    offsets = np.meshgrid(
        *[grid.h[a] * np.arange(-(grid.m[a] - 1), grid.m[a]) for a in range(grid.n)],
        indexing="ij",
    )
    r = np.sqrt(sum(c * c for c in offsets))
    center = tuple(ma - 1 for ma in grid.m)
    r[center] = 1.0  # placeholder, replaced by the cell average below
    weights = r ** (-mu)
    self_weight = _cell_average_kernel(grid.h, mu, max(quad_points, 32))
    weights[center] = self_weight
    weights.setflags(write=False)
    return KernelTable(grid=grid, mu=mu, weights=weights, self_weight=self_weight)


def _density(u: Field, exps: Exponents) -> np.ndarray:
    return np.abs(u.values) ** exps.two_star_mu


def _direct_potential(rho: np.ndarray, grid: DomainGrid, kt: KernelTable) -> np.ndarray:
    from ._directconv import direct_convolve

    mask_idx = np.argwhere(grid.mask)
    rho_m = rho[grid.mask]
    kbase = np.array([ma - 1 for ma in grid.m], dtype=np.int64)
    kshape = np.array(kt.weights.shape, dtype=np.int64)
    phi_m = direct_convolve(mask_idx.astype(np.int64), rho_m,
                            kt.weights.ravel(), kshape, kbase)
    out = np.zeros(grid.m)
    out[grid.mask] = phi_m
    return out


def riesz_potential(u: Field, exps: Exponents, kt: KernelTable,
                    method: str = "fast") -> Field:
    """Nonlocal potential of |u|^{2*_mu} against the tabulated kernel,
    including the regularized self term."""
    grid = u.grid
    rho = _density(u, exps)
    if method == "fast":
        phi = fftconvolve(rho, kt.weights, mode="same")
        phi = np.where(grid.mask, phi, 0.0)
    elif method == "direct":
        phi = _direct_potential(rho, grid, kt)
    else:
        raise ValueError(f"unknown convolution method {method!r}")
    phi = np.maximum(phi, 0.0) * grid.cell_volume
    return Field(grid, phi)


def choquard_energy(u: Field, exps: Exponents, kt: KernelTable,
                    method: str = "fast", potential: Field | None = None) -> float:
    """Double integral B(u) of |u|^{2*_mu} against itself through the kernel."""
    phi = potential if potential is not None else riesz_potential(u, exps, kt, method)
    rho = _density(u, exps)
    return float(np.sum(phi.values * rho)) * u.grid.cell_volume


def hls_check(u: Field, exps: Exponents, kt: KernelTable, c_hat: float,
              method: str = "fast") -> dict:
    """Compare B(u) against the estimated sharp-constant bound."""
    from .grid import lp_integral

    lhs = choquard_energy(u, exps, kt, method)
    norm_2s = lp_integral(u, exps.two_star)
    if norm_2s == 0.0:
        raise ValueError("hls_check requires a nonzero field")
    rhs = c_hat * norm_2s ** (exps.p_growth / exps.two_star)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs}
