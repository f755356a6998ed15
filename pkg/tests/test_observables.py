import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from henonmix import observables as obs
from henonmix.henon import Point, ProductPoint


@pytest.fixture(scope="module")
def unit_bump():
    return obs.make_bump(Point(0, 0), 1.0, 1.0)


def _cloud(rng, n, scale=0.6):
    raw = rng.uniform(-scale, scale, (n, 4))
    return raw[:, 0] + 1j * raw[:, 1], raw[:, 2] + 1j * raw[:, 3]


def test_bump_center_and_support(unit_bump):
    assert unit_bump(Point(0, 0)) == 1.0
    assert unit_bump(Point(1.0, 0)) == 0.0
    assert unit_bump(Point(0.8, 0.8)) == 0.0
    v = unit_bump(Point(0.3, 0.2))
    assert 0 < v < 1
    assert v <= unit_bump.norm_bound


def test_bump_gradient_matches_fd(unit_bump):
    rng = np.random.default_rng(0)
    z, w = _cloud(rng, 1000)
    gz, gw = unit_bump.gradient_batch(z, w)
    fz, fw = obs._fd_gradient(unit_bump.ev, z, w)
    denom = np.maximum(np.abs(gz), 1e-6)
    assert np.max(np.abs(gz - fz) / denom) <= 1e-6 * 1e2  # central diff O(h^2)
    assert np.max(np.abs(gw - fw)) <= 1e-6


def test_bump_hessian_matches_fd(unit_bump):
    rng = np.random.default_rng(1)
    z, w = _cloud(rng, 500)
    h11, h12, h22 = unit_bump.hessian_batch(z, w)
    f11, f12, f22 = obs._fd_hessian(unit_bump.ev, z, w)
    assert np.max(np.abs(h11 - f11)) <= 1e-5
    assert np.max(np.abs(h12 - f12)) <= 1e-5
    assert np.max(np.abs(h22 - f22)) <= 1e-5


def test_complex_hessian_squared_norm():
    sq = obs.squared_norm()
    H = obs.complex_hessian(sq, Point(1.3 + 0.2j, -0.7j))
    assert np.allclose(H, np.eye(2))


def test_complex_hessian_pluriharmonic():
    re_z = obs.coordinate("re_z")
    H = obs.complex_hessian(re_z, Point(0.5, -0.5))
    assert np.allclose(H, np.zeros((2, 2)))


def test_gradient_form_critical_point(unit_bump):
    G = obs.gradient_form(unit_bump, Point(0, 0))
    assert np.allclose(G, np.zeros((2, 2)), atol=1e-14)


def test_gradient_form_re_z():
    G = obs.gradient_form(obs.coordinate("re_z"), Point(1, 1))
    assert np.allclose(G, np.diag([0.25, 0.0]))


def test_gradient_form_psd_rank_one(unit_bump):
    rng = np.random.default_rng(2)
    for _ in range(200):
        z, w = rng.uniform(-0.7, 0.7, 2)
        G = obs.gradient_form(unit_bump, Point(z, w))
        eig = np.linalg.eigvalsh(G)
        assert eig[0] >= -1e-12
        assert eig[0] <= 1e-10  # second eigenvalue ~ 0: rank <= 1


def test_loewner_examples():
    I = np.eye(2, dtype=complex)
    Z = np.zeros((2, 2), dtype=complex)
    assert obs.loewner_leq(Z, I, 0.0)
    assert not obs.loewner_leq(I, Z, 0.0)


def test_loewner_squared_norm_ball():
    sq = obs.squared_norm()
    for r in (0.2, 0.6, 0.99):
        A = obs.gradient_form(sq, Point(r, 0))
        B = obs.complex_hessian(sq, Point(r, 0))
        assert obs.loewner_leq(A, B, 0.0)
    A = obs.gradient_form(sq, Point(1.2, 0))
    B = obs.complex_hessian(sq, Point(1.2, 0))
    assert not obs.loewner_leq(A, B, 0.0)


def test_cauchy_schwarz_cross_form(unit_bump):
    """2 |off-diagonal| <= trace bound at the matrix level (slack 1e-10)."""
    g2 = obs.make_bump(Point(0.2, -0.1), 0.9, 0.8)
    rng = np.random.default_rng(3)
    for _ in range(100):
        z, w = rng.uniform(-0.6, 0.6, 2)
        p = Point(z, w)
        a = obs.gradient_form(unit_bump, p)
        b = obs.gradient_form(g2, p)
        gz1, gw1 = unit_bump.gradient_batch(np.array([p.z]), np.array([p.w]))
        gz2, gw2 = g2.gradient_batch(np.array([p.z]), np.array([p.w]))
        v1 = np.array([gz1[0], gw1[0]])
        v2 = np.array([gz2[0], gw2[0]])
        cross = abs(v1 @ v2.conj())
        assert 2 * cross <= np.trace(a).real + np.trace(b).real + 1e-10


def test_c2_decompose_zero_function():
    zero = obs.make_bump(Point(0, 0), 0.5, 0.0)
    dec = obs.c2_decompose(zero, 1.0, 2.0)
    rng = np.random.default_rng(4)
    z, w = _cloud(rng, 200, 0.9)
    recon = dec.A * (dec.g_plus.eval_batch(z, w) - dec.g_minus.eval_batch(z, w))
    assert np.max(np.abs(recon)) <= 1e-14
    # g+ = g- = 2 A^-1 A1 rho ||x||^2 when g = 0
    assert np.max(np.abs(dec.g_plus.eval_batch(z, w) - dec.g_minus.eval_batch(z, w))) <= 1e-14


def test_c2_decompose_reconstruction_and_loewner():
    rng = np.random.default_rng(5)
    g = obs.make_bump(Point(0.3, -0.2), 0.8, 0.9)
    dec = obs.c2_decompose(g, 1.5, 2.5)
    pts = rng.normal(size=(2000, 4))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    r = 1.5 * rng.uniform(0, 1, 2000) ** 0.25
    z = (pts[:, 0] + 1j * pts[:, 1]) * r
    w = (pts[:, 2] + 1j * pts[:, 3]) * r
    recon = dec.A * (
        dec.g_plus.eval_batch(z, w) - dec.g_minus.eval_batch(z, w)
    ) - g.eval_batch(z, w)
    assert np.max(np.abs(recon)) <= 1e-12
    for piece in (dec.g_plus, dec.g_minus):
        h11, h12, h22 = piece.hessian_batch(z, w)
        gz, gw = piece.gradient_batch(z, w)
        a = h11 - np.abs(gz) ** 2
        b = h12 - gz * np.conj(gw)
        c = h22 - np.abs(gw) ** 2
        min_eig = np.min((a + c) / 2 - np.sqrt(((a - c) / 2) ** 2 + np.abs(b) ** 2))
        assert min_eig >= -1e-9


def test_c2_decompose_rejects_oversized_support():
    g = obs.make_bump(Point(0, 0), 3.0, 1.0)
    with pytest.raises(ValueError):
        obs.c2_decompose(g, 1.0, 2.0)


def test_mollify_constant_exact():
    c = obs.constant(-1.7)
    m = obs.mollify(c, 0.25, measure_box=1.0)
    rng = np.random.default_rng(6)
    z, w = _cloud(rng, 64, 1.0)
    assert np.max(np.abs(m.eval_batch(z, w) + 1.7)) <= 1e-12


def test_mollify_never_grows_sup_norm(unit_bump):
    m = obs.mollify(unit_bump, 0.2, measure_box=1.5)
    rng = np.random.default_rng(7)
    z, w = _cloud(rng, 500, 1.4)
    assert np.max(np.abs(m.eval_batch(z, w))) <= 1.0 + 1e-12


def test_mollify_smooth_quadratic_rate(unit_bump):
    prev = None
    for eps in (0.25, 0.125, 0.0625):
        m = obs.mollify(unit_bump, eps, measure_box=1.5)
        ratio = m.measured_sup_error / eps**2
        if prev is not None:
            assert 0.5 <= ratio / prev <= 2.0  # error tracks eps^2
        prev = ratio


def test_mollify_interpolation_constants_cusp():
    cusp = obs.holder_cusp(Point(0.5, 0.5), 1.0)
    cs, cps = [], []
    for k in range(3, 8):
        eps = 2.0**-k
        m = obs.mollify(cusp, eps, measure_box=2.0)
        cs.append(m.measured_sup_error / eps)
        cps.append(m.measured_c2 * eps)
    assert max(cs) / min(cs) < 2.0
    assert max(cps) / min(cps) < 2.0


def test_build_h_identity_cases(horseshoe, unit_bump):
    h1 = obs.build_h([unit_bump], horseshoe, [5])
    assert h1(Point(0.1, 0.1)) == unit_bump(Point(0.1, 0.1))
    ones = obs.constant(1.0)
    h = obs.build_h([ones, ones, ones], horseshoe, [3, 7, 9])
    assert h(Point(0.3, -0.2)) == 1.0
    g2 = obs.make_bump(Point(0.2, 0.2), 0.8, 0.5)
    h_eq = obs.build_h([unit_bump, g2], horseshoe, [4, 4])
    x = Point(0.05, -0.1)
    assert abs(h_eq(x) - unit_bump(x) * g2(x)) <= 1e-15


def test_build_h_rejects_decreasing_times(horseshoe, unit_bump):
    with pytest.raises(ValueError):
        obs.build_h([unit_bump, unit_bump], horseshoe, [5, 3])


def test_build_phi_zero_inputs(horseshoe):
    zero = obs.constant(0.0)
    phi = obs.build_phi(zero, [zero], horseshoe, [2], B_radius=3.0)
    assert phi.M == 10.0
    x = Point(0.5, 0.5)
    assert abs(phi.g0_plus(x) - 10.0) <= 1e-12  # M chi
    assert abs(phi.h_plus(x) - 10.0) <= 1e-12
    assert abs(phi.h_minus(x) + 12.0) <= 1e-12  # -(M + 2) chi


def test_build_phi_difference_identity(horseshoe):
    g0 = obs.make_bump(Point(0.5, 0), 1.0, 0.8)
    gs = [obs.make_bump(Point(0, 0.5), 1.0, 0.9), obs.make_bump(Point(0.2, 0.2), 1.0, 0.7)]
    phi = obs.build_phi(g0, gs, horseshoe, [2, 4], B_radius=2.0)
    rng = np.random.default_rng(8)
    z, w = _cloud(rng, 200, 1.3)  # inside the chi = 1 region
    dev = phi.h_plus.eval_batch(z, w) - phi.h_minus.eval_batch(z, w) - 2 * (phi.M + 1) ** phi.kappa
    assert np.max(np.abs(dev)) <= 1e-9


def test_build_phi_bound_on_chi_region(horseshoe):
    gs = [obs.make_bump(Point(0.3, 0.1), 1.2, 1.0)]
    g0 = obs.make_bump(Point(-0.2, 0.4), 1.2, 1.0)
    phi = obs.build_phi(g0, gs, horseshoe, [2], B_radius=1.5)
    M, k = phi.M, phi.kappa
    rng = np.random.default_rng(9)
    for _ in range(100):
        q = ProductPoint(
            Point(*rng.uniform(-1.4, 1.4, 2)), Point(*rng.uniform(-1.4, 1.4, 2))
        )
        assert abs(phi.phi_plus(q)) <= (M + 1) ** (k + 1) + 1e-9


def test_positivity_bracket_exact_values():
    assert abs(obs.positivity_bracket(1, 10.0) - 7.0) <= 1e-12
    assert abs(obs.positivity_bracket(2, 20.0) - 298.0) <= 1e-9


def test_positivity_bracket_all_positive():
    for k in range(1, 21):
        assert obs.positivity_bracket(k, 10.0 * k) > 0


def test_euler_bound_below_three():
    k = np.arange(1, 1_000_001, dtype=np.float64)
    assert bool(np.all((1.0 + 1.0 / k) ** k < 3.0))


@settings(max_examples=50, deadline=None)
@given(k=st.integers(1, 50))
def test_positivity_bracket_property(k):
    assert obs.positivity_bracket(k, 10.0 * k) > 0


def test_positivity_bracket_validation():
    with pytest.raises(ValueError):
        obs.positivity_bracket(1, 1.0)
    with pytest.raises(ValueError):
        obs.positivity_bracket(0, 10.0)


def test_phi_hessian_check_zero_inputs(horseshoe, s8):
    zero = obs.constant(0.0)
    phi = obs.build_phi(zero, [zero], horseshoe, [2], B_radius=4.0)
    rep = obs.phi_hessian_check(phi, horseshoe, s8, slack=1e-9, n_pairs=16)
    assert rep.n_checked == 16
    assert not rep.precondition_violations
    # phi is M^(kappa+1) chi(w) chi(z): Hessian vanishes where chi = 1
    assert rep.min_eig_phi_plus >= -1e-9


def test_phi_hessian_check_decomposed_inputs(horseshoe, s8):
    """Decomposition outputs satisfy the precondition, so no violations and
    the proof's lower bound is PSD at the checked points."""
    raw0 = obs.make_bump(Point(0.5, 0.5), 1.0, 0.8)
    raw1 = obs.make_bump(Point(-0.5, 0.3), 1.0, 0.9)
    D, Dp = 4.0, 5.0
    g0 = obs.c2_decompose(raw0, D, Dp).g_plus
    g1 = obs.c2_decompose(raw1, D, Dp).g_plus
    phi = obs.build_phi(g0, [g1], horseshoe, [2], B_radius=4.0)
    rep = obs.phi_hessian_check(
        phi, horseshoe, s8, slack=1e-9, n_pairs=24, perturbation=1e-4
    )
    assert rep.bracket == pytest.approx(7.0)
    assert not rep.precondition_violations
    assert rep.n_checked == 24
    assert rep.min_eig_gap_plus >= -1e-9
    assert rep.min_eig_gap_minus >= -1e-9
    assert rep.min_eig_phi_plus >= -1e-9
    assert rep.min_eig_phi_minus >= -1e-9


def test_pullback_chain_rule(horseshoe, s8):
    g = obs.make_bump(Point(2.0, 2.0), 1.5, 1.0)
    pg = obs.pullback(g, horseshoe, 2)
    z, w = s8.z[:64], s8.w[:64]
    assert np.max(np.abs(pg.eval_batch(z, w))) > 0  # lands in the support
    gz, gw = pg.gradient_batch(z, w)
    fz, fw = obs._fd_gradient(pg.ev, z, w)
    assert np.max(np.abs(gz - fz)) <= 1e-4 * max(1.0, np.max(np.abs(gz)))
    h = pg.hessian_batch(z, w)
    fh = obs._fd_hessian(pg.ev, z, w)
    scale = max(1.0, max(np.max(np.abs(h[i])) for i in range(3)))
    for i in range(3):
        assert np.max(np.abs(h[i] - fh[i])) <= 1e-3 * scale


def test_pullback_backward_chain_rule(horseshoe, s8):
    g = obs.make_bump(Point(2.0, 2.0), 1.5, 1.0)
    pg = obs.pullback(g, horseshoe, -1)
    z, w = s8.z[:64], s8.w[:64]
    assert np.max(np.abs(pg.eval_batch(z, w))) > 0
    gz, gw = pg.gradient_batch(z, w)
    fz, fw = obs._fd_gradient(pg.ev, z, w)
    scale = max(1.0, float(np.max(np.abs(gz))))
    assert np.max(np.abs(gz - fz)) <= 1e-4 * scale
    assert np.max(np.abs(gw - fw)) <= 1e-4 * scale
    h = pg.hessian_batch(z, w)
    fh = obs._fd_hessian(pg.ev, z, w)
    hscale = max(1.0, max(np.max(np.abs(h[i])) for i in range(3)))
    for i in range(3):
        assert np.max(np.abs(h[i] - fh[i])) <= 1e-3 * hscale


def test_norm_bound_spot_check(unit_bump):
    rng = np.random.default_rng(10)
    z, w = _cloud(rng, 2000, 1.2)
    assert np.max(np.abs(unit_bump.eval_batch(z, w))) <= unit_bump.norm_bound
