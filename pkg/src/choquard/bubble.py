"""Talenti bubbles, cutoff instantons, numerical Sobolev/HLS constants and
the mountain-pass seeding construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (DomainGrid, Field, build_grid, grad_inner, h1_seminorm_sq,
                   random_field, stiffness_matrix)
from .riesz import Exponents, KernelTable, choquard_energy, riesz_potential
from .energy import singular_integral
from .fiber import FiberScalars


class BubbleError(ValueError):
    pass


class SeedFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class BubbleSpec:
    epsilon: float
    center: tuple
    cutoff_radius: float


@dataclass(frozen=True)
class CriticalConstants:
    S_hat: float
    S_HL_hat: float
    C_nmu_hat: float
    level_gap: float
    s_error: float
    flagged: bool


def _inside_distance(grid: DomainGrid, center: np.ndarray) -> float:
    """Distance from center to the domain boundary (analytic shapes)."""
    if grid.shape_tag == "ball":
        return grid.radius - float(np.linalg.norm(center))
    ext = np.asarray(grid.extent)
    return float(np.min(np.minimum(center, ext - center)))


def bubble_amplitude(n: int) -> float:
    return (n * (n - 2.0)) ** ((n - 2.0) / 4.0)


def bubble_profile(r, epsilon: float, n: int):
    """Radial extremal (n(n-2))^{(n-2)/4} (eps / (eps^2 + r^2))^{(n-2)/2}."""
    r = np.asarray(r, dtype=float)
    return bubble_amplitude(n) * (epsilon / (epsilon ** 2 + r * r)) ** ((n - 2.0) / 2.0)


def _cutoff(r, cutoff_radius: float):
    """Quintic ramp: 1 inside R/2, C^2-smooth to 0 at R."""
    r = np.asarray(r, dtype=float)
    inner = cutoff_radius / 2.0
    xi = np.clip((r - inner) / (cutoff_radius - inner), 0.0, 1.0)
    return 1.0 - (10.0 * xi ** 3 - 15.0 * xi ** 4 + 6.0 * xi ** 5)


def default_bubble_spec(grid: DomainGrid, epsilon: float | None = None) -> BubbleSpec:
    """Bubble at the domain center; epsilon defaults to 4 cells, the smallest
    scale the grid resolves without aliasing the core."""
    center = grid.center
    d = _inside_distance(grid, center)
    if epsilon is None:
        epsilon = 4.0 * max(grid.h)
    return BubbleSpec(epsilon=float(epsilon), center=tuple(center), cutoff_radius=d)


def talenti_bubble(grid: DomainGrid, spec: BubbleSpec, exps: Exponents,
                   apply_cutoff: bool = True) -> Field:
    center = np.asarray(spec.center, dtype=float)
    if spec.epsilon <= 0:
        raise BubbleError("epsilon must be positive")
    d = _inside_distance(grid, center)
    if d <= 0:
        raise BubbleError(f"bubble center {spec.center} lies outside the domain")
    if spec.cutoff_radius > d + 1e-12:
        raise BubbleError("cutoff ball is not contained in the domain")
    mesh = grid.coord_mesh()
    r = np.sqrt(sum((mesh[a] - center[a]) ** 2 for a in range(grid.n)))
    vals = bubble_profile(r, spec.epsilon, exps.n)
    if apply_cutoff:
        vals = vals * _cutoff(r, spec.cutoff_radius)
    return Field(grid, np.where(grid.mask, vals, 0.0))


def bubble_gradient_sq(r, epsilon: float, n: int):
    """Analytic |grad U_eps|^2 as a function of radius."""
    r = np.asarray(r, dtype=float)
    amp2 = (n * (n - 2.0)) ** ((n - 2.0) / 2.0)
    return (amp2 * (n - 2.0) ** 2 * epsilon ** (n - 2.0)
            * r * r / (epsilon ** 2 + r * r) ** n)


def _box_gradient_energy(m: int, half_width: float, epsilon: float, n: int) -> float:
    """Trapezoid quadrature of |grad U_eps|^2 over the centered box."""
    x = np.linspace(-half_width, half_width, m)
    h = x[1] - x[0]
    w = np.ones(m)
    w[0] = w[-1] = 0.5
    mesh = np.meshgrid(*([x] * n), indexing="ij")
    r = np.sqrt(sum(c * c for c in mesh))
    f = bubble_gradient_sq(r, epsilon, n)
    weights = w
    for _ in range(n - 1):
        weights = weights[..., None] * w
    return float(np.sum(f * weights)) * h ** n


def _richardson_h(hs, vals):
    """Exact 3-point elimination of the h^2 and h^4 quadrature error terms."""
    hs = np.asarray(hs, dtype=float)
    M = np.vstack([np.ones(3), hs ** 2, hs ** 4]).T
    coef = np.linalg.solve(M, np.asarray(vals, dtype=float))
    return float(coef[0])


def sobolev_constant_estimate(exps: Exponents, ladder_m=(81, 121, 161),
                              eps_values=(0.06, 0.10, 0.14), half_width=1.0):
    """Box quadrature of the bubble gradient energy, h- then eps-extrapolated.

    The full-space integral equals S^{n/2} for every eps; on the truncated box
    the tail deficit expands in odd powers of eps, so after the h-Richardson
    step an exact (1, eps, eps^3) fit through three eps values recovers the
    eps -> 0 limit.  The reported error is the spread between that fit and a
    plain linear one.  Returns (S_hat, error_estimate).
    """
    if len(ladder_m) != 3 or len(eps_values) != 3:
        raise BubbleError("extrapolation needs exactly 3 grids and 3 eps values")
    n = exps.n
    vals_eps = []
    for eps in eps_values:
        vals_h = [_box_gradient_energy(m, half_width, eps, n) for m in ladder_m]
        hs = [2.0 * half_width / (m - 1) for m in ladder_m]
        vals_eps.append(_richardson_h(hs, vals_h))
    eps_arr = np.asarray(eps_values, dtype=float)
    vals_eps = np.asarray(vals_eps)
    M3 = np.vstack([np.ones(3), eps_arr, eps_arr ** 3]).T
    s_pow = float(np.linalg.solve(M3, vals_eps)[0])
    M1 = np.vstack([np.ones(3), eps_arr]).T
    lin, *_ = np.linalg.lstsq(M1, vals_eps, rcond=None)
    err_pow = abs(s_pow - float(lin[0]))
    s_hat = s_pow ** (2.0 / n)
    err = s_hat * (2.0 / n) * err_pow / s_pow
    return s_hat, err


def _rayleigh_quotient(vec, A, cell, B, two_star_mu):
    nsq = float(vec @ (A @ vec)) * cell
    return nsq / B ** (1.0 / two_star_mu)


def _smooth_masked(grid: DomainGrid, vec):
    """One Jacobi-style averaging sweep on the masked nodes; used to keep
    descent directions at resolved scales (grid-frequency spikes make the
    forward-difference quotient alias below its resolved values)."""
    u = np.zeros(grid.m)
    u[grid.mask] = vec
    acc = np.zeros_like(u)
    cnt = np.zeros_like(u)
    for axis in range(grid.n):
        for shift in (1, -1):
            rolled = np.roll(u, shift, axis=axis)
            mrolled = np.roll(grid.mask, shift, axis=axis)
            edge = [slice(None)] * grid.n
            edge[axis] = 0 if shift == 1 else -1
            rolled[tuple(edge)] = 0.0
            mrolled[tuple(edge)] = False
            acc += np.where(mrolled, rolled, 0.0)
            cnt += mrolled
    out = 0.5 * u + 0.5 * acc / np.maximum(cnt, 1.0)
    return out[grid.mask]


def _bubble_quotient(grid, exps, kt, epsilon, cutoff_radius):
    spec = BubbleSpec(float(epsilon), tuple(grid.center), cutoff_radius)
    u = talenti_bubble(grid, spec, exps)
    B = choquard_energy(u, exps, kt)
    return h1_seminorm_sq(u) / B ** (1.0 / exps.two_star_mu), u


def minimize_hls_quotient(grid: DomainGrid, exps: Exponents, kt: KernelTable,
                          rng_seed: int = 0, iters: int = 30) -> float:
    """Best-found value of the Rayleigh quotient ||u||^2 / B(u)^{1/2*_mu}.

    Golden-section search over the cutoff-bubble scale, then descent polish
    from the best bubble and five random positive fields; descent directions
    are stiffness-preconditioned and smoothed so iterates stay at scales the
    grid resolves.  Deterministic best-of, ties broken by seed order.
    """
    from scipy.sparse.linalg import splu

    A, _ = stiffness_matrix(grid)
    lu = splu(A.tocsc())
    mask = grid.mask
    cell = grid.cell_volume
    d = _inside_distance(grid, grid.center)

    lo, hi = np.log(1.5 * max(grid.h)), np.log(0.5 * d)
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1, c2 = b - gr * (b - a), a + gr * (b - a)
    q1, _ = _bubble_quotient(grid, exps, kt, np.exp(c1), d)
    q2, _ = _bubble_quotient(grid, exps, kt, np.exp(c2), d)
    for _ in range(20):
        if q1 <= q2:
            b, c2, q2 = c2, c1, q1
            c1 = b - gr * (b - a)
            q1, _ = _bubble_quotient(grid, exps, kt, np.exp(c1), d)
        else:
            a, c1, q1 = c1, c2, q2
            c2 = a + gr * (b - a)
            q2, _ = _bubble_quotient(grid, exps, kt, np.exp(c2), d)
    eps_best = np.exp(c1 if q1 <= q2 else c2)
    _, u_best = _bubble_quotient(grid, exps, kt, eps_best, d)

    seeds = [u_best.values[mask]]
    for k in range(5):
        rng = np.random.default_rng([int(rng_seed), 104729, k])
        seeds.append(random_field(grid, rng, positive=True).values[mask])

    p = exps.two_star_mu
    best = np.inf
    for vec in seeds:
        u = np.zeros(grid.m)
        u[mask] = vec
        f = Field(grid, u)
        phi = riesz_potential(f, exps, kt)
        B = choquard_energy(f, exps, kt, potential=phi)
        if not B > 0:
            continue
        quot = _rayleigh_quotient(vec, A, cell, B, p)
        step = 1.0
        for _ in range(iters):
            nsq = float(vec @ (A @ vec)) * cell
            gN = 2.0 * (A @ vec) * cell
            gB = 2.0 * p * (phi.values * np.sign(f.values)
                            * np.abs(f.values) ** (p - 1.0))[mask] * cell
            Bpow = B ** (1.0 / p)
            grad = (gN * Bpow - nsq * (1.0 / p) * B ** (1.0 / p - 1.0) * gB) / Bpow ** 2
            dvec = _smooth_masked(grid, _smooth_masked(grid, lu.solve(grad)))
            improved = False
            s = step
            for _ in range(25):
                cand = vec - s * dvec
                u = np.zeros(grid.m)
                u[mask] = cand
                cf = Field(grid, u)
                cphi = riesz_potential(cf, exps, kt)
                cB = choquard_energy(cf, exps, kt, potential=cphi)
                if cB > 0:
                    cq = _rayleigh_quotient(cand, A, cell, cB, p)
                    if cq < quot * (1.0 - 1e-14):
                        vec, f, phi, B, quot = cand, cf, cphi, cB, cq
                        improved = True
                        step = min(2.0 * s, 16.0)
                        break
                s *= 0.5
            if not improved:
                break
        best = min(best, quot)
    return float(best)


def level_gap_from(exps: Exponents, s_hl: float) -> float:
    n, mu = exps.n, exps.mu
    return (n - mu + 2.0) / (2.0 * (2.0 * n - mu)) * s_hl ** ((2.0 * n - mu) / (n - mu + 2.0))


def estimate_critical_constants(grid_ladder, exps: Exponents,
                                work_grid: DomainGrid | None = None,
                                work_kt: KernelTable | None = None,
                                eps_values=(0.06, 0.10, 0.14),
                                rng_seed: int = 0) -> CriticalConstants:
    """Sobolev constant from a bubble-quadrature refinement ladder, HLS best
    constant from Rayleigh-quotient minimization, sharp constant from the
    relation between the two."""
    grid_ladder = list(grid_ladder)
    if len(grid_ladder) < 3:
        raise BubbleError("need a ladder of at least 3 refinements")
    ladder_m = tuple(g.m[0] for g in grid_ladder)
    half_width = grid_ladder[0].extent[0] / 2.0
    s_hat, s_err = sobolev_constant_estimate(exps, ladder_m=ladder_m,
                                             eps_values=eps_values,
                                             half_width=half_width)
    if work_grid is None:
        work_grid = grid_ladder[0]
    if work_kt is None:
        from .riesz import kernel_table
        work_kt = kernel_table(work_grid, exps.mu)
    s_hl_hat = minimize_hls_quotient(work_grid, exps, work_kt, rng_seed=rng_seed)
    c_nmu_hat = (s_hat / s_hl_hat) ** exps.two_star_mu
    return CriticalConstants(
        S_hat=s_hat,
        S_HL_hat=s_hl_hat,
        C_nmu_hat=c_nmu_hat,
        level_gap=level_gap_from(exps, s_hl_hat),
        s_error=s_err,
        flagged=bool(s_err > 0.05 * s_hat),
    )


def _sigma_values(u_plus: Field, bubble: Field, t: float, lam: float,
                  exps: Exponents, kt: KernelTable, cross: float,
                  nsq_u: float, nsq_b: float):
    w = Field(u_plus.grid, u_plus.values + t * bubble.values)
    nsq = nsq_u + 2.0 * t * cross + t * t * nsq_b
    A = singular_integral(w, exps.q)
    B = choquard_energy(w, exps, kt)
    sigma1 = nsq - lam * A - B
    sigma2 = nsq + lam * exps.q * A - (exps.p_growth - 1.0) * B
    return sigma1, sigma2, FiberScalars(nsq, A, B, exps.q, exps.p_growth)


def mountain_pass_seed(u_plus: Field, lam: float, exps: Exponents,
                       kt: KernelTable, consts: CriticalConstants,
                       spec: BubbleSpec | None = None,
                       t_grid_size: int = 200) -> Field:
    """Seed on the N^- branch: u_plus + t' * Phi_eps where t' is the root of
    sigma_1 past the last sign change of sigma_2."""
    grid = u_plus.grid
    if spec is None:
        spec = default_bubble_spec(grid)
    bubble = talenti_bubble(grid, spec, exps)
    nsq_u = h1_seminorm_sq(u_plus)
    nsq_b = h1_seminorm_sq(bubble)
    cross = grad_inner(u_plus, bubble)

    ts = np.logspace(-3, 3, t_grid_size)
    s1 = np.empty(t_grid_size)
    s2 = np.empty(t_grid_size)
    for i, t in enumerate(ts):
        s1[i], s2[i], _ = _sigma_values(u_plus, bubble, t, lam, exps, kt,
                                        cross, nsq_u, nsq_b)

    nonneg = np.nonzero(s2 >= 0.0)[0]
    if nonneg.size == 0:
        t0 = 0.0
    else:
        k = nonneg[-1]
        if k + 1 >= t_grid_size:
            raise SeedFailure("sigma_2 stays nonnegative over the whole t-grid")
        lo, hi = ts[k], ts[k + 1]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            _, s2m, _ = _sigma_values(u_plus, bubble, mid, lam, exps, kt,
                                      cross, nsq_u, nsq_b)
            if s2m >= 0.0:
                lo = mid
            else:
                hi = mid
        t0 = hi

    # bracket the sigma_1 root past t0
    t_lo = max(t0, ts[0])
    s1_lo, _, _ = _sigma_values(u_plus, bubble, t_lo, lam, exps, kt,
                                cross, nsq_u, nsq_b)
    if s1_lo <= 0.0:
        raise SeedFailure("sigma_1 is not positive at t0; seed construction failed")
    t_hi = t_lo
    bracketed = False
    while t_hi < 1e6:
        t_hi *= 2.0
        s1_hi, _, _ = _sigma_values(u_plus, bubble, t_hi, lam, exps, kt,
                                    cross, nsq_u, nsq_b)
        if s1_hi < 0.0:
            bracketed = True
            break
    if not bracketed:
        raise SeedFailure("sigma_1 root not bracketed below t = 1e6")
    for _ in range(80):
        mid = 0.5 * (t_lo + t_hi)
        s1m, _, _ = _sigma_values(u_plus, bubble, mid, lam, exps, kt,
                                  cross, nsq_u, nsq_b)
        if s1m > 0.0:
            t_lo = mid
        else:
            t_hi = mid
        if (t_hi - t_lo) <= 1e-12 * t_hi:
            break
    t_prime = 0.5 * (t_lo + t_hi)
    return Field(grid, u_plus.values + t_prime * bubble.values)
