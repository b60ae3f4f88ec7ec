"""Two-branch solver: projected descent on the N^+ and N^- Nehari slices,
plus weak-residual verification of the terminal fields."""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import (DomainGrid, Field, grad_inner, h1_seminorm_sq, random_field,
                   stiffness_matrix)
from .riesz import Exponents, KernelTable, riesz_potential, choquard_energy
from .energy import (EnergyBreakdown, default_floor, energy, gradient_field,
                     weak_residual)
from .fiber import (FiberDiagnostics, FiberScalars, NoProjectionError,
                    diagnostics_from_scalars, _find_roots, field_scalars)
from .bubble import (BubbleSpec, CriticalConstants, SeedFailure,
                     default_bubble_spec, mountain_pass_seed, talenti_bubble)
from .regularity import Envelope, boundary_envelope, linf_bound


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    lam: float
    max_iters: int = 400
    step0: float = 1.0
    energy_tol: float = 1e-10
    residual_tol: float = 1e-4
    floor: float = 0.0  # 0 -> automatic 1e-8 * max(u) per iterate
    seed_kind: str = "eigenmode"
    rng_seed: int = 0
    n_residual_tests: int = 20

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        for name in ("energy_tol", "residual_tol", "step0"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SolutionReport:
    branch: str
    field: Field = dc_field(repr=False)
    energy: EnergyBreakdown
    fiber: FiberDiagnostics
    residual_max: float
    min_value: float
    linf: float
    envelope: Envelope | None
    iters: int
    converged: bool
    notes: tuple = ()


def _seed_field(cfg: SolverConfig, grid: DomainGrid, exps: Exponents,
                lu) -> Field:
    if cfg.seed_kind == "eigenmode":
        # few inverse-power steps from the torsion function
        vec = lu.solve(np.ones(int(grid.mask.sum())))
        for _ in range(5):
            vec = lu.solve(vec)
            vec /= np.max(np.abs(vec))
        vals = np.zeros(grid.m)
        vals[grid.mask] = vec
        return Field(grid, vals)
    if cfg.seed_kind == "random_bump":
        rng = np.random.default_rng([int(cfg.rng_seed), 11])
        return random_field(grid, rng, positive=True)
    if cfg.seed_kind == "bubble":
        return talenti_bubble(grid, default_bubble_spec(grid),
                              _exps_for_grid(grid, exps))
    raise ValueError(f"unknown seed_kind {cfg.seed_kind!r}")


def _exps_for_grid(grid, exps):
    return exps


class _ProjectedDescent:
    """Shared machinery for both branches: stiffness-preconditioned descent
    step, positive-part clamp, Nehari re-projection with cached scalars."""

    def __init__(self, cfg, grid, exps, kt, branch):
        from scipy.sparse.linalg import splu

        self.cfg = cfg
        self.grid = grid
        self.exps = exps
        self.kt = kt
        self.branch = branch
        self.A, _ = stiffness_matrix(grid)
        self.lu = splu(self.A.tocsc())

    def project(self, f: Field):
        """Project onto the branch; returns (field, scalars, potential)."""
        phi = riesz_potential(f, self.exps, self.kt)
        B = choquard_energy(f, self.exps, self.kt, potential=phi)
        sc = field_scalars(f, self.exps, self.kt, B=B)
        if self.cfg.lam >= sc.lambda_crit:
            raise NoProjectionError(self.cfg.lam, sc.lambda_crit)
        t1, t2 = _find_roots(sc, self.cfg.lam)
        t = t1 if self.branch == "Nplus" else t2
        proj = t * f
        sc_proj = FiberScalars(sc.norm_sq * t * t, sc.A * t ** (1.0 - self.exps.q),
                               sc.B * t ** self.exps.p_growth, sc.q, sc.p)
        phi_proj = Field(self.grid, phi.values * t ** self.exps.two_star_mu)
        return proj, sc_proj, phi_proj

    def run(self, seed: Field):
        cfg, exps, kt = self.cfg, self.exps, self.kt
        u, sc, phi = self.project(seed)
        e_curr = float(sc.phi(1.0, cfg.lam))
        step = cfg.step0
        history = []
        iters = 0
        for iters in range(1, cfg.max_iters + 1):
            floor = cfg.floor if cfg.floor > 0 else default_floor(u)
            g = gradient_field(u, cfg.lam, exps, kt, floor, potential=phi)
            d = self.lu.solve(g.values[self.grid.mask])
            dvals = np.zeros(self.grid.m)
            dvals[self.grid.mask] = d
            accepted = False
            s = step
            for _ in range(30):
                trial_vals = np.maximum(u.values - s * dvals, 0.0)
                if not trial_vals.any():
                    s *= 0.5
                    continue
                trial = Field(self.grid, trial_vals)
                try:
                    proj, sc_t, phi_t = self.project(trial)
                except NoProjectionError:
                    s *= 0.5
                    continue
                e_new = float(sc_t.phi(1.0, cfg.lam))
                if e_new < e_curr:
                    u, sc, phi = proj, sc_t, phi_t
                    rel = (e_curr - e_new) / max(abs(e_curr), 1e-300)
                    e_curr = e_new
                    history.append(rel)
                    accepted = True
                    step = min(s * 2.0, 64.0 * cfg.step0)
                    break
                s *= 0.5
            if not accepted:
                history.append(0.0)
            if len(history) >= 5 and all(r < cfg.energy_tol for r in history[-5:]):
                break
        return u, sc, phi, e_curr, iters


def _finalize(cfg, grid, exps, kt, branch, u, sc, phi, iters, notes=()):
    diag = diagnostics_from_scalars(sc, cfg.lam)
    ebd = EnergyBreakdown(
        lam=cfg.lam,
        kinetic=0.5 * sc.norm_sq,
        singular=cfg.lam / (1.0 - exps.q) * sc.A,
        nonlocal_=sc.B / exps.p_growth,
        total=0.5 * sc.norm_sq - cfg.lam / (1.0 - exps.q) * sc.A - sc.B / exps.p_growth,
    )
    min_value = float(np.min(u.values[grid.mask])) if grid.mask.any() else 0.0
    ver = verify_solution_field(u, cfg.lam, exps, kt,
                                n_tests=cfg.n_residual_tests,
                                rng_seed=cfg.rng_seed, floor=cfg.floor,
                                potential=phi)
    env = None
    if min_value > 0:
        env = boundary_envelope(u, grid)
    converged = (ver["residual_max"] <= cfg.residual_tol
                 and diag.classification == branch
                 and min_value > 0.0)
    return SolutionReport(branch=branch, field=u, energy=ebd, fiber=diag,
                          residual_max=ver["residual_max"], min_value=min_value,
                          linf=linf_bound(u), envelope=env, iters=iters,
                          converged=converged, notes=tuple(notes))


def minimize_nplus(cfg: SolverConfig, grid: DomainGrid, exps: Exponents,
                   kt: KernelTable) -> SolutionReport:
    pd = _ProjectedDescent(cfg, grid, exps, kt, "Nplus")
    seed = _seed_field(cfg, grid, exps, pd.lu)
    try:
        u, sc, phi, e_curr, iters = pd.run(seed)
    except NoProjectionError as exc:
        raise SolverError(
            f"N+ projection failed: lambda={cfg.lam} >= lambda_crit="
            f"{exc.lambda_crit} for the seed") from exc
    if not np.any(u.values[grid.mask] > 0):
        raise SolverError("terminal N+ field is not positive anywhere")
    notes = []
    if e_curr >= 0:
        notes.append("energy not negative: expected inf I(N+) < 0")
    report = _finalize(cfg, grid, exps, kt, "Nplus", u, sc, phi, iters, notes)
    if report.energy.total >= 0:
        report.converged = False
    return report


def minimize_nminus(cfg: SolverConfig, grid: DomainGrid, exps: Exponents,
                    kt: KernelTable, u_plus: SolutionReport,
                    consts: CriticalConstants,
                    bubble_spec: BubbleSpec | None = None) -> SolutionReport:
    if not u_plus.converged:
        raise SolverError("minimize_nminus requires a converged N+ report")
    pd = _ProjectedDescent(cfg, grid, exps, kt, "Nminus")
    notes = []
    try:
        seed = mountain_pass_seed(u_plus.field, cfg.lam, exps, kt, consts,
                                  spec=bubble_spec)
    except SeedFailure as exc:
        notes.append(f"mountain-pass seed failed ({exc}); using scaled-bubble fallback")
        seed = _fallback_minus_seed(pd, grid, exps, kt, bubble_spec)
    u, sc, phi, e_curr, iters = pd.run(seed)
    report = _finalize(cfg, grid, exps, kt, "Nminus", u, sc, phi, iters, notes)
    level_bound = u_plus.energy.total + consts.level_gap
    if report.energy.total >= level_bound:
        report.converged = False
        report.notes = report.notes + (
            f"level-gap violation: I(v)={report.energy.total:.6g} >= "
            f"I(u)+gap={level_bound:.6g} (grid too coarse)",)
    return report


def _fallback_minus_seed(pd, grid, exps, kt, bubble_spec):
    spec = bubble_spec or default_bubble_spec(grid)
    bubble = talenti_bubble(grid, spec, exps)
    best = None
    best_e = np.inf
    for t in np.logspace(-2, 2, 17):
        try:
            proj, sc, _ = pd.project(t * bubble)
        except NoProjectionError:
            continue
        e = float(sc.phi(1.0, pd.cfg.lam))
        if e < best_e:
            best, best_e = proj, e
    if best is None:
        raise SolverError("no N- seed could be projected")
    return best


def _bump_field(grid: DomainGrid, rng: np.random.Generator) -> Field:
    """Compactly supported C^1 bump at a random interior node."""
    hmin = min(grid.h)
    interior = np.argwhere(grid.mask & (grid.delta >= 2.0 * hmin))
    if interior.size == 0:
        interior = np.argwhere(grid.mask)
    center_idx = interior[rng.integers(len(interior))]
    axes = grid.axis_coords()
    center = np.array([axes[a][center_idx[a]] for a in range(grid.n)])
    max_r = max(float(grid.delta[tuple(center_idx)]), 2.0 * hmin)
    r_bump = rng.uniform(2.0 * hmin, max(2.0 * hmin + 1e-12, max_r))
    mesh = grid.coord_mesh()
    r2 = sum((mesh[a] - center[a]) ** 2 for a in range(grid.n)) / (r_bump * r_bump)
    vals = np.maximum(1.0 - r2, 0.0) ** 2
    return Field(grid, np.where(grid.mask, vals, 0.0))


def _eigenmode_field(grid: DomainGrid) -> Field:
    axes = grid.axis_coords()
    mesh = np.meshgrid(*axes, indexing="ij")
    vals = np.ones(grid.m)
    for a in range(grid.n):
        lo = axes[a][0]
        vals = vals * np.sin(np.pi * (mesh[a] - lo) / grid.extent[a])
    return Field(grid, np.where(grid.mask, vals, 0.0))


def verify_solution_field(u: Field, lam: float, exps: Exponents, kt: KernelTable,
                          n_tests: int = 20, rng_seed: int = 0,
                          floor: float = 0.0, potential: Field | None = None) -> dict:
    """Weak residuals against random bumps plus the coordinate eigenmode,
    normalized by the test-field energy norm; also checks the u^{-q} w L^1
    condition per test."""
    grid = u.grid
    phi = potential if potential is not None else riesz_potential(u, exps, kt)
    per_test = []
    fields = [("eigenmode", _eigenmode_field(grid))]
    for k in range(int(n_tests)):
        rng = np.random.default_rng([int(rng_seed), 31337, k])
        fields.append((f"bump{k}", _bump_field(grid, rng)))
    floor_val = floor if floor > 0 else default_floor(u)
    residual_max = 0.0
    cell = grid.cell_volume
    for name, w in fields:
        wnorm = np.sqrt(h1_seminorm_sq(w))
        if wnorm == 0:
            continue
        r = weak_residual(u, w, lam, exps, kt, floor=floor_val, potential=phi)
        pos = grid.mask & (u.values > 0)
        l1 = float(np.sum(u.values[pos] ** (-exps.q) * np.abs(w.values[pos]))) * cell
        normalized = abs(r) / wnorm
        residual_max = max(residual_max, normalized)
        per_test.append({"test": name, "residual": r, "wnorm": wnorm,
                         "normalized": normalized, "singular_l1": l1})
    return {"residual_max": residual_max, "per_test": per_test}


def verify_solution(report: SolutionReport, lam: float, exps: Exponents,
                    kt: KernelTable, n_tests: int = 20, rng_seed: int = 0) -> dict:
    if np.any(report.field.values[report.field.grid.mask] <= 0):
        raise SolverError("verify_solution requires a positive field on the mask")
    return verify_solution_field(report.field, lam, exps, kt,
                                 n_tests=n_tests, rng_seed=rng_seed)
