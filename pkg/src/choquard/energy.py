"""Energy functional with singular and nonlocal parts, weak-form residuals
and the strong-form descent gradient."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field, grad_inner, h1_seminorm_sq, lp_integral, neg_laplacian
from .riesz import Exponents, KernelTable, choquard_energy, riesz_potential


class SingularityError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyBreakdown:
    lam: float
    kinetic: float
    singular: float
    nonlocal_: float
    total: float


def singular_integral(u: Field, q: float) -> float:
    """A(u): integral of |u|^{1-q}; always finite on a grid."""
    if not (0.0 < q < 1.0):
        raise SingularityError(f"q={q} violates 0 < q < 1")
    return lp_integral(u, 1.0 - q)


def energy(u: Field, lam: float, exps: Exponents, kt: KernelTable,
           method: str = "fast") -> EnergyBreakdown:
    kinetic = 0.5 * h1_seminorm_sq(u)
    singular = lam / (1.0 - exps.q) * singular_integral(u, exps.q)
    nl = choquard_energy(u, exps, kt, method) / exps.p_growth
    return EnergyBreakdown(lam=float(lam), kinetic=kinetic, singular=singular,
                           nonlocal_=nl, total=kinetic - singular - nl)


def _signed_power(values: np.ndarray, p: float) -> np.ndarray:
    """sign(u) |u|^p, with 0 mapped to 0 even when p <= 0."""
    out = np.zeros_like(values)
    nz = values != 0.0
    out[nz] = np.sign(values[nz]) * np.abs(values[nz]) ** p
    return out


def _floored_inv_power(values: np.ndarray, mask: np.ndarray, q: float,
                       floor: float) -> np.ndarray:
    clipped = np.maximum(values, floor)
    out = np.zeros_like(values)
    out[mask] = clipped[mask] ** (-q)
    return out


def default_floor(u: Field, scale: float = 1e-8) -> float:
    peak = float(np.max(np.abs(u.values)))
    return scale * peak if peak > 0 else scale


def weak_residual(u: Field, w: Field, lam: float, exps: Exponents,
                  kt: KernelTable, floor: float = 0.0,
                  potential: Field | None = None) -> float:
    """Weak-form defect against the test field w; zero at a discrete
    solution for every w."""
    grid = u.grid
    if floor == 0.0:
        bad = (u.values <= 0.0) & (w.values != 0.0) & grid.mask
        if np.any(bad):
            raise SingularityError(
                f"u <= 0 at {int(bad.sum())} nodes on supp w and no floor supplied")
        floor = 0.0
        inv = np.zeros(grid.m)
        pos = grid.mask & (u.values > 0.0)
        inv[pos] = u.values[pos] ** (-exps.q)
    else:
        inv = _floored_inv_power(u.values, grid.mask, exps.q, floor)
    phi = potential if potential is not None else riesz_potential(u, exps, kt)
    nl_density = phi.values * _signed_power(u.values, exps.two_star_mu - 1.0)
    cell = grid.cell_volume
    return (grad_inner(u, w)
            - lam * float(np.sum(inv * w.values)) * cell
            - float(np.sum(nl_density * w.values)) * cell)


def gradient_field(u: Field, lam: float, exps: Exponents, kt: KernelTable,
                   floor: float, potential: Field | None = None) -> Field:
    """Strong-form Euler-Lagrange gradient on masked nodes; satisfies
    sum(G * w) * h^n == weak_residual(u, w) by summation by parts."""
    if floor <= 0.0:
        raise SingularityError("gradient_field requires floor > 0")
    grid = u.grid
    phi = potential if potential is not None else riesz_potential(u, exps, kt)
    inv = _floored_inv_power(u.values, grid.mask, exps.q, floor)
    nl_density = phi.values * _signed_power(u.values, exps.two_star_mu - 1.0)
    g = neg_laplacian(u) - lam * inv - nl_density
    return Field(grid, np.where(grid.mask, g, 0.0))
