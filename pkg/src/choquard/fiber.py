"""Fibering-map algebra: the energy along rays t -> I(tu), its reduced scalar
form m_u(t), closed-form extremum, root finding, manifold classification and
the lambda thresholds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import DomainGrid, Field, h1_seminorm_sq, random_field, stiffness_matrix
from .riesz import Exponents, KernelTable, choquard_energy
from .energy import singular_integral

NPLUS = "Nplus"
NMINUS = "Nminus"
NZERO = "Nzero"
OFF_MANIFOLD = "off_manifold"

MEMBERSHIP_RTOL = 1e-9
DEADBAND_RTOL = 1e-9
ROOT_RTOL = 1e-12


class FiberError(ValueError):
    pass


class NoProjectionError(FiberError):
    """Raised when lambda >= lambda_crit(u) so the fiber map has no roots."""

    def __init__(self, lam, lambda_crit):
        super().__init__(
            f"lambda={lam} >= lambda_crit={lambda_crit}: fiber map has no critical points")
        self.lam = lam
        self.lambda_crit = lambda_crit


@dataclass(frozen=True)
class FiberScalars:
    """Cached ray coefficients; all fiber evaluations are scalar arithmetic."""
    norm_sq: float
    A: float
    B: float
    q: float
    p: float  # growth exponent 2 * 2*_mu

    def phi(self, t, lam):
        t = np.asarray(t, dtype=float)
        return (0.5 * t ** 2 * self.norm_sq
                - lam / (1.0 - self.q) * t ** (1.0 - self.q) * self.A
                - t ** self.p / self.p * self.B)

    def dphi(self, t, lam):
        t = np.asarray(t, dtype=float)
        return (t * self.norm_sq - lam * t ** (-self.q) * self.A
                - t ** (self.p - 1.0) * self.B)

    def d2phi(self, t, lam):
        t = np.asarray(t, dtype=float)
        return (self.norm_sq + self.q * lam * t ** (-self.q - 1.0) * self.A
                - (self.p - 1.0) * t ** (self.p - 2.0) * self.B)

    def m(self, t):
        t = np.asarray(t, dtype=float)
        return t ** (1.0 + self.q) * self.norm_sq - t ** (self.p - 1.0 + self.q) * self.B

    @property
    def t_max(self):
        return ((1.0 + self.q) * self.norm_sq
                / ((self.p - 1.0 + self.q) * self.B)) ** (1.0 / (self.p - 2.0))

    @property
    def m_max(self):
        p, q = self.p, self.q
        return ((p - 2.0) / (p - 1.0 + q)
                * ((1.0 + q) / (p - 1.0 + q)) ** ((1.0 + q) / (p - 2.0))
                * self.norm_sq ** ((p - 1.0 + q) / (p - 2.0))
                / self.B ** ((1.0 + q) / (p - 2.0)))

    @property
    def lambda_crit(self):
        return self.m_max / self.A


@dataclass(frozen=True)
class FiberDiagnostics:
    norm_sq: float
    A: float
    B: float
    t_max: float
    m_max: float
    lambda_crit: float
    lam: float
    roots: tuple | None
    classification: str

    def scalars(self, q, p) -> FiberScalars:
        return FiberScalars(self.norm_sq, self.A, self.B, q, p)


@dataclass
class Constants:
    """Estimated embedding constants C_alpha and the closed-form threshold."""
    c_alpha: dict
    lambda_star: float | None = None


def field_scalars(u: Field, exps: Exponents, kt: KernelTable,
                  method: str = "fast", B: float | None = None) -> FiberScalars:
    norm_sq = h1_seminorm_sq(u)
    if norm_sq == 0.0:
        raise FiberError("fiber analysis requires a nonzero field")
    A = singular_integral(u, exps.q)
    if B is None:
        B = choquard_energy(u, exps, kt, method)
    return FiberScalars(norm_sq=norm_sq, A=A, B=B, q=exps.q, p=exps.p_growth)


def fiber_value(u, t, lam, exps, kt, method="fast"):
    _check_t(t)
    return float(field_scalars(u, exps, kt, method).phi(t, lam))


def fiber_d1(u, t, lam, exps, kt, method="fast"):
    _check_t(t)
    return float(field_scalars(u, exps, kt, method).dphi(t, lam))


def fiber_d2(u, t, lam, exps, kt, method="fast"):
    _check_t(t)
    return float(field_scalars(u, exps, kt, method).d2phi(t, lam))


def _check_t(t):
    if np.any(np.asarray(t) <= 0.0):
        raise FiberError("fiber parameter t must be positive")


def _bisect(f, lo, hi, rtol=ROOT_RTOL, max_iter=200):
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise FiberError("root not bracketed")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0 or (hi - lo) <= rtol * mid:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def _find_roots(sc: FiberScalars, lam: float):
    """Two roots of m_u(t) = lam * A on the monotone branches around t_max."""
    target = lam * sc.A
    t_max = sc.t_max

    def g(t):
        return sc.m(t) - target

    t_lo = t_max
    for _ in range(400):
        t_lo *= 0.5
        if g(t_lo) < 0.0:
            break
    t_hi = t_max
    for _ in range(400):
        t_hi *= 2.0
        if g(t_hi) < 0.0:
            break
    t1 = _bisect(g, t_lo, t_max)
    t2 = _bisect(g, t_max, t_hi)
    return float(t1), float(t2)


def classify_at_one(sc: FiberScalars, lam: float) -> str:
    d1 = sc.dphi(1.0, lam)
    if abs(d1) > MEMBERSHIP_RTOL * sc.norm_sq:
        return OFF_MANIFOLD
    d2 = sc.d2phi(1.0, lam)
    band = DEADBAND_RTOL * sc.norm_sq
    if d2 > band:
        return NPLUS
    if d2 < -band:
        return NMINUS
    return NZERO


def diagnostics_from_scalars(sc: FiberScalars, lam: float) -> FiberDiagnostics:
    t_max = sc.t_max
    m_max = sc.m_max
    lambda_crit = m_max / sc.A
    roots = _find_roots(sc, lam) if lam < lambda_crit else None
    return FiberDiagnostics(norm_sq=sc.norm_sq, A=sc.A, B=sc.B, t_max=float(t_max),
                            m_max=float(m_max), lambda_crit=float(lambda_crit),
                            lam=float(lam), roots=roots,
                            classification=classify_at_one(sc, lam))


def fiber_diagnostics(u: Field, lam: float, exps: Exponents, kt: KernelTable,
                      method: str = "fast") -> FiberDiagnostics:
    return diagnostics_from_scalars(field_scalars(u, exps, kt, method), lam)


def nehari_project_plus(u: Field, lam: float, exps: Exponents, kt: KernelTable,
                        method: str = "fast") -> Field:
    sc = field_scalars(u, exps, kt, method)
    if lam >= sc.lambda_crit:
        raise NoProjectionError(lam, sc.lambda_crit)
    t1, _ = _find_roots(sc, lam)
    return t1 * u


def nehari_project_minus(u: Field, lam: float, exps: Exponents, kt: KernelTable,
                         method: str = "fast") -> Field:
    sc = field_scalars(u, exps, kt, method)
    if lam >= sc.lambda_crit:
        raise NoProjectionError(lam, sc.lambda_crit)
    _, t2 = _find_roots(sc, lam)
    return t2 * u


def estimate_embedding_constant(grid: DomainGrid, alpha: float, trials: int,
                                rng_seed: int = 0, iters: int = 120,
                                two_star: float | None = None) -> float:
    """Best-found value of sup { int |u|^alpha : ||u|| = 1 }.

    Stiffness-preconditioned projected ascent from `trials` random starts;
    trial seeds come from a common stream so larger `trials` only adds starts.
    Reported value is a certified lower bound of the true constant.
    """
    if alpha <= 0 or (two_star is not None and alpha > two_star):
        raise FiberError(f"alpha={alpha} out of range (0, 2*]")
    from scipy.sparse.linalg import splu

    A, _ = stiffness_matrix(grid)
    lu = splu((A * grid.cell_volume).tocsc())
    mask = grid.mask
    cell = grid.cell_volume
    best = 0.0
    for trial in range(max(1, int(trials))):
        rng = np.random.default_rng([int(rng_seed), trial])
        u = random_field(grid, rng, positive=True)
        vec = u.values[mask]
        nsq = _norm_sq_masked(vec, lu, A, cell)
        vec = vec / np.sqrt(nsq)
        obj = np.sum(np.abs(vec) ** alpha) * cell
        step = 1.0
        for _ in range(iters):
            g = alpha * np.sign(vec) * np.abs(vec) ** (alpha - 1.0) * cell
            d = lu.solve(g)
            improved = False
            s = step
            for _ in range(25):
                cand = vec + s * d
                nsq = float(cand @ (A @ cand)) * cell
                if nsq > 0:
                    cand = cand / np.sqrt(nsq)
                    cand_obj = np.sum(np.abs(cand) ** alpha) * cell
                    if cand_obj > obj * (1.0 + 1e-14):
                        vec, obj, improved = cand, cand_obj, True
                        step = min(s * 2.0, 64.0)
                        break
                s *= 0.5
            if not improved:
                break
        best = max(best, float(obj))
    return best


def _norm_sq_masked(vec, lu, A, cell):
    return float(vec @ (A @ vec)) * cell


def lambda_star_closed_form(consts: Constants, exps: Exponents, c_nmu: float,
                            K: float = 1.0) -> float:
    """Closed-form lower threshold for the two-root regime.

    K is not pinned down by the analysis; it is a config input defaulting to
    1, so the returned value is a heuristic diagnostic rather than a gate.
    """
    q, p = exps.q, exps.p_growth
    needed = (1.0 - q, exps.two_star)
    for a in needed:
        if a not in consts.c_alpha:
            raise FiberError(f"missing embedding constant C_{a}")
    c_1mq = consts.c_alpha[1.0 - q]
    c_2s = consts.c_alpha[exps.two_star]
    coef = ((p - 2.0) / (p - 1.0 + q)
            * ((1.0 + q) / (p - 1.0 + q)) ** ((1.0 + q) / (p - 2.0)))
    crit_term = (c_nmu * c_2s ** (p / exps.two_star)) ** (-(1.0 + q) / (p - 2.0))
    return coef * crit_term / (K * c_1mq)


def empirical_lambda_crit_proxy(grid: DomainGrid, exps: Exponents, kt: KernelTable,
                                n_probes: int = 20, rng_seed: int = 0,
                                method: str = "fast") -> float:
    """Min of lambda_crit over random probe fields.

    This is a finite-probe proxy for the uniform threshold, which is a sup
    over the whole cone and is not computable from finitely many fields.
    """
    best = np.inf
    for k in range(n_probes):
        rng = np.random.default_rng([int(rng_seed), 7919, k])
        u = random_field(grid, rng, positive=True)
        sc = field_scalars(u, exps, kt, method)
        best = min(best, sc.lambda_crit)
    return float(best)
