import numpy as np
import pytest

from choquard import (Constants, FiberScalars, NoProjectionError, build_grid,
                      classify_at_one, diagnostics_from_scalars,
                      empirical_lambda_crit_proxy, estimate_embedding_constant,
                      fiber_diagnostics, kernel_table,
                      lambda_star_closed_form, nehari_project_minus,
                      nehari_project_plus)
from choquard.fiber import (NMINUS, NPLUS, OFF_MANIFOLD, FiberError,
                            _find_roots, field_scalars, fiber_d1, fiber_d2,
                            fiber_value)

from conftest import rand_field

# reference ray with (norm_sq, A, B) = (1, 1, 1), q = 0.5, p = 10
UNIT_SC = FiberScalars(1.0, 1.0, 1.0, 0.5, 10.0)
T_MAX_ORACLE = (1.5 / 9.5) ** 0.125          # 0.7939551255177646
M_MAX_ORACLE = 0.5957448775301013            # m(t_max), dense-scan verified
T1_ORACLE = 0.4486314218535046               # bisection oracle, lam = 0.3
T2_ORACLE = 0.9524546565068908


def dense_scan(sc, n_points=10 ** 6):
    """Independent argmax of m: dense scan plus one parabolic refinement."""
    t_hi = 1.0
    while sc.m(2.0 * t_hi) > 0.0:
        t_hi *= 2.0
    ts = np.linspace(1e-9, 2.0 * t_hi, n_points)
    vals = sc.m(ts)
    k = int(np.argmax(vals))
    t0, t1, t2 = ts[k - 1], ts[k], ts[k + 1]
    y0, y1, y2 = vals[k - 1], vals[k], vals[k + 1]
    denom = y0 - 2.0 * y1 + y2
    t_star = t1 - 0.5 * (ts[1] - ts[0]) * (y2 - y0) / denom
    return t_star, float(sc.m(t_star))


def test_closed_forms_match_reference():
    assert UNIT_SC.t_max == pytest.approx(T_MAX_ORACLE, rel=1e-14)
    assert UNIT_SC.m_max == pytest.approx(M_MAX_ORACLE, rel=1e-12)
    assert UNIT_SC.lambda_crit == pytest.approx(M_MAX_ORACLE, rel=1e-12)


def test_unit_ray_d1_formula():
    for t in (0.2, 0.7940, 1.5):
        expected = t - 0.3 * t ** -0.5 - t ** 9
        assert UNIT_SC.dphi(t, 0.3) == pytest.approx(expected, rel=1e-14)


def test_unit_ray_roots_frozen():
    t1, t2 = _find_roots(UNIT_SC, 0.3)
    assert t1 == pytest.approx(T1_ORACLE, rel=1e-10)
    assert t2 == pytest.approx(T2_ORACLE, rel=1e-10)
    assert abs(UNIT_SC.m(t1) - 0.3) <= 1e-10 * 0.3
    assert abs(UNIT_SC.m(t2) - 0.3) <= 1e-10 * 0.3
    assert t1 < UNIT_SC.t_max < t2


def test_no_roots_above_threshold():
    diag = diagnostics_from_scalars(UNIT_SC, 1.0)
    assert diag.roots is None


def test_closed_form_vs_dense_scan_random_scalars():
    rng = np.random.default_rng(0)
    for _ in range(20):
        sc = FiberScalars(float(rng.uniform(0.5, 5.0)), float(rng.uniform(0.1, 3.0)),
                          float(rng.uniform(1e-4, 10.0)), 0.5, 10.0)
        t_scan, m_scan = dense_scan(sc, n_points=10 ** 5)
        assert sc.t_max == pytest.approx(t_scan, rel=1e-6)
        assert sc.m_max == pytest.approx(m_scan, rel=1e-6)


def test_d1_equals_reduced_form(ball9, kt9, exps3):
    u = rand_field(ball9, 1)
    sc = field_scalars(u, exps3, kt9)
    lam = 0.2
    for t in (0.3, 1.0, 1.9):
        reduced = t ** (-sc.q) * (sc.m(t) - lam * sc.A)
        assert sc.dphi(t, lam) == pytest.approx(reduced, rel=1e-12)


def test_fiber_value_derivative_fd(ball9, kt9, exps3):
    u = rand_field(ball9, 2)
    lam = 0.2
    t, eps = 0.9, 1e-6
    fd = (fiber_value(u, t + eps, lam, exps3, kt9)
          - fiber_value(u, t - eps, lam, exps3, kt9)) / (2.0 * eps)
    assert fiber_d1(u, t, lam, exps3, kt9) == pytest.approx(fd, rel=1e-6)


def test_fiber_rejects_nonpositive_t(ball9, kt9, exps3):
    with pytest.raises(FiberError):
        fiber_value(rand_field(ball9, 3), 0.0, 0.2, exps3, kt9)


def test_diagnostics_zero_field_rejected(ball9, kt9, exps3):
    from choquard.grid import zeros_field
    with pytest.raises(FiberError):
        fiber_diagnostics(zeros_field(ball9), 0.2, exps3, kt9)


def test_root_count_transition_at_lambda_crit(ball9, kt9, exps3):
    u = rand_field(ball9, 4)
    sc = field_scalars(u, exps3, kt9)
    lc = sc.lambda_crit
    lo, hi = 0.5 * lc, 2.0 * lc
    assert diagnostics_from_scalars(sc, lo).roots is not None
    assert diagnostics_from_scalars(sc, hi).roots is None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if diagnostics_from_scalars(sc, mid).roots is not None:
            lo = mid
        else:
            hi = mid
    assert hi - lo <= 1e-8 * lc
    assert abs(0.5 * (lo + hi) - lc) <= 1e-8 * lc


def test_projection_classifications(ball13, kt13, exps3):
    u = rand_field(ball13, 5)
    sc = field_scalars(u, exps3, kt13)
    lam = 0.5 * sc.lambda_crit
    up = nehari_project_plus(u, lam, exps3, kt13)
    um = nehari_project_minus(u, lam, exps3, kt13)
    dp = fiber_diagnostics(up, lam, exps3, kt13)
    dm = fiber_diagnostics(um, lam, exps3, kt13)
    assert dp.classification == NPLUS
    assert dm.classification == NMINUS
    assert fiber_d2(up, 1.0, lam, exps3, kt13) > 0
    assert fiber_d2(um, 1.0, lam, exps3, kt13) < 0
    assert fiber_diagnostics(u, lam, exps3, kt13).classification == OFF_MANIFOLD


def test_projection_scale_invariance(ball13, kt13, exps3):
    u = rand_field(ball13, 6)
    lam = 0.3 * field_scalars(u, exps3, kt13).lambda_crit
    p1 = nehari_project_plus(u, lam, exps3, kt13)
    p2 = nehari_project_plus(2.6 * u, lam, exps3, kt13)
    scale = np.max(np.abs(p1.values))
    assert np.max(np.abs(p1.values - p2.values)) <= 1e-8 * scale


def test_projection_rejects_large_lambda(ball9, kt9, exps3):
    u = rand_field(ball9, 7)
    lc = field_scalars(u, exps3, kt9).lambda_crit
    with pytest.raises(NoProjectionError) as exc:
        nehari_project_plus(u, 2.0 * lc, exps3, kt9)
    assert exc.value.lambda_crit == pytest.approx(lc)


def test_fiber_monotonicity_pattern(ball9, kt9, exps3):
    # phi decreasing on (0,t1), increasing on (t1,t2), decreasing past t2
    u = rand_field(ball9, 8)
    sc = field_scalars(u, exps3, kt9)
    lam = 0.5 * sc.lambda_crit
    t1, t2 = _find_roots(sc, lam)
    for a, b, sign in (((1e-6) * t1, t1, -1.0), (t1, t2, 1.0), (t2, 4.0 * t2, -1.0)):
        ts = np.linspace(a + 1e-9, b - 1e-9, 50)
        vals = sc.phi(ts, lam)
        assert np.all(sign * np.diff(vals) >= -1e-12 * np.max(np.abs(vals)))


def test_embedding_constant_eigenvalue_oracle(box17):
    # alpha = 2 supremum equals the inverse first Dirichlet eigenvalue
    est = estimate_embedding_constant(box17, 2.0, trials=5)
    assert est == pytest.approx(1.0 / (3.0 * np.pi ** 2), rel=0.05)


def test_embedding_constant_monotone_in_trials(box17):
    lo = estimate_embedding_constant(box17, 2.0, trials=1)
    hi = estimate_embedding_constant(box17, 2.0, trials=4)
    assert hi >= lo


def test_embedding_constant_validates_probes(ball9):
    from choquard.grid import h1_seminorm_sq, lp_integral
    alpha = 2.0
    est = estimate_embedding_constant(ball9, alpha, trials=5)
    for seed in range(20):
        u = rand_field(ball9, 300 + seed, positive=(seed % 2 == 0))
        lhs = lp_integral(u, alpha)
        assert lhs <= 1.0001 * est * h1_seminorm_sq(u) ** (alpha / 2.0)


def test_embedding_constant_range_check(ball9):
    with pytest.raises(FiberError):
        estimate_embedding_constant(ball9, -1.0, trials=1)


def test_lambda_star_positive_and_monotone(ball9, exps3):
    c = Constants(c_alpha={0.5: 0.9, 6.0: 0.02})
    ls = lambda_star_closed_form(c, exps3, c_nmu=2.0)
    assert ls > 0
    doubled = Constants(c_alpha={0.5: 1.8, 6.0: 0.02})
    assert lambda_star_closed_form(doubled, exps3, c_nmu=2.0) == pytest.approx(
        ls / 2.0, rel=1e-12)


def test_lambda_star_missing_constant(exps3):
    with pytest.raises(FiberError):
        lambda_star_closed_form(Constants(c_alpha={0.5: 0.9}), exps3, c_nmu=2.0)


def test_lambda_star_below_probe_thresholds(ball13, kt13, exps3):
    c_1mq = estimate_embedding_constant(ball13, 1.0 - exps3.q, trials=3)
    c_2s = estimate_embedding_constant(ball13, exps3.two_star, trials=3)
    from choquard import minimize_hls_quotient, sobolev_constant_estimate
    s_hat, _ = sobolev_constant_estimate(exps3)
    s_hl = minimize_hls_quotient(ball13, exps3, kt13, rng_seed=0)
    c_nmu = (s_hat / s_hl) ** exps3.two_star_mu
    consts = Constants(c_alpha={1.0 - exps3.q: c_1mq, exps3.two_star: c_2s})
    ls = lambda_star_closed_form(consts, exps3, c_nmu=c_nmu)
    assert ls > 0
    for seed in range(20):
        u = rand_field(ball13, 400 + seed)
        assert field_scalars(u, exps3, kt13).lambda_crit >= ls


def test_norm_bound_on_nminus(ball13, kt13, exps3):
    # lower bound on the norm over the N^- slice
    from choquard.grid import h1_seminorm_sq
    c_1mq = estimate_embedding_constant(ball13, 1.0 - exps3.q, trials=3)
    p, q = exps3.p_growth, exps3.q
    for seed in range(5):
        u = rand_field(ball13, 500 + seed)
        sc = field_scalars(u, exps3, kt13)
        lam = 0.4 * sc.lambda_crit
        v = nehari_project_minus(u, lam, exps3, kt13)
        bound = (lam * (p - 1.0 + q) * c_1mq / (p - 2.0)) ** (1.0 / (1.0 + q))
        assert np.sqrt(h1_seminorm_sq(v)) >= bound


def test_empirical_proxy_deterministic(ball9, kt9, exps3):
    a = empirical_lambda_crit_proxy(ball9, exps3, kt9, rng_seed=3)
    b = empirical_lambda_crit_proxy(ball9, exps3, kt9, rng_seed=3)
    assert a == b
