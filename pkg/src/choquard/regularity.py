"""Numerical regularity diagnostics: sup bounds, boundedness of the nonlocal
potential, and the two-sided boundary envelope L*delta <= u <= K*delta."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DomainGrid, Field
from .riesz import Exponents, KernelTable, riesz_potential


class EnvelopeError(ValueError):
    pass


@dataclass(frozen=True)
class Envelope:
    L: float
    K: float
    band_stats: tuple  # ((delta_lo, delta_hi, ratio_min, ratio_max), ...) per decile


def linf_bound(u: Field) -> float:
    if not np.any(u.grid.mask):
        return 0.0
    return float(np.max(np.abs(u.values[u.grid.mask])))


def boundary_envelope(u: Field, grid: DomainGrid | None = None) -> Envelope:
    """Envelope constants over nodes with delta >= h, excluding the first
    layer where the discrete ratio measures stencil truncation, not the PDE."""
    grid = grid or u.grid
    hmin = min(grid.h)
    sel = grid.mask & (grid.delta >= hmin)
    if not np.any(sel):
        raise EnvelopeError("no nodes with delta >= h; grid too coarse")
    vals = u.values[sel]
    if np.any(vals <= 0.0):
        raise EnvelopeError("boundary_envelope requires u > 0 on the mask")
    ratio = vals / grid.delta[sel]
    L = float(np.min(ratio))
    K = float(np.max(ratio))
    deltas = grid.delta[sel]
    edges = np.quantile(deltas, np.linspace(0.0, 1.0, 11))
    bands = []
    for b in range(10):
        lo, hi = edges[b], edges[b + 1]
        in_band = (deltas >= lo) & (deltas <= hi if b == 9 else deltas < hi)
        if np.any(in_band):
            bands.append((float(lo), float(hi),
                          float(np.min(ratio[in_band])), float(np.max(ratio[in_band]))))
        else:
            bands.append((float(lo), float(hi), float("nan"), float("nan")))
    return Envelope(L=L, K=K, band_stats=tuple(bands))


def nonlocal_potential_bound(u: Field, exps: Exponents, kt: KernelTable,
                             method: str = "fast") -> float:
    """Max of the Riesz potential over masked nodes (the L^infty bound the
    bootstrap starts from)."""
    phi = riesz_potential(u, exps, kt, method)
    return linf_bound(phi)


def supersolution_check(grid: DomainGrid, k2: float, q: float, h_bar: float,
                        R: float = 0.0, s: float = 0.0, alpha: float | None = None):
    """Optional cross-check of the distance-supersolution construction:
    verifies -lap(rho(delta)) - k2 rho(delta)^{-q} >= 0 nodewise on the thin
    boundary strip.  Disabled by default in reports; needs a k2 estimate.
    """
    from .grid import neg_laplacian

    if alpha is None:
        alpha = 2.0 / min(grid.h)

    def rho0(t):
        t = np.asarray(t)
        ramp = h_bar * (2.0 * t - np.where(t > 0, t, 1.0) ** (2.0 - s))
        return np.where(t >= 1.0, h_bar, np.where(t > 0, ramp, 0.0))

    vals = np.where(grid.mask, rho0(np.clip(alpha * grid.delta, 0.0, None)), 0.0)
    f = Field(grid, vals)
    lap = neg_laplacian(f)
    strip = grid.mask & (grid.delta < 1.0 / alpha) & (grid.delta >= min(grid.h))
    lhs = lap[strip] - k2 * np.maximum(vals[strip], 1e-300) ** (-q)
    return bool(np.all(lhs >= 0.0)), float(np.min(lhs)) if strip.any() else 0.0
