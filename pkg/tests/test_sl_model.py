import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from delaysync.errors import InvalidInputError, PreconditionError
from delaysync.graph import gen_directed_ring, laplacian_spectrum
from delaysync.numerics import eig_complex
from delaysync.sl_model import (
    SLParams,
    sl_char_H,
    sl_equilibrium_model,
    sl_g_pm,
    sl_kappa_c_periodic,
    sl_periodic_asymptotic,
    sl_periodic_exact_spectrum,
    sl_periodic_frame,
    sl_stability_map,
    sl_sync_direction,
    write_map_csv,
)
from delaysync.spectrum import compute_r0, instantaneous_spectrum

PI = math.pi
P = SLParams(1.0, PI)


def test_params_validation():
    with pytest.raises(InvalidInputError):
        SLParams(1.0, 0.0)
    with pytest.raises(InvalidInputError):
        SLParams(float("nan"), 1.0)
    assert SLParams(-1, 1).regime == "equilibrium" and SLParams(1, 1).regime == "periodic"


def test_equilibrium_model():
    m = sl_equilibrium_model(SLParams(-1.0, PI))
    ev = eig_complex(m.J)
    assert np.allclose(sorted(ev, key=lambda z: z.imag), [-1 - 1j * PI, -1 + 1j * PI])
    assert instantaneous_spectrum(m)[1] == []
    assert compute_r0(m) == pytest.approx(1.0, abs=1e-8)
    assert len(instantaneous_spectrum(sl_equilibrium_model(P))[1]) == 2
    assert compute_r0(sl_equilibrium_model(SLParams(-2.5, 1.0))) == pytest.approx(2.5, abs=1e-8)


def test_equilibrium_field_matches_complex_form():
    m = sl_equilibrium_model(SLParams(-0.7, 2.0))
    x = np.array([[0.3, -0.4], [1.0, 0.5]])
    z = x[:, 0] + 1j * x[:, 1]
    dz = (-0.7 + 2j) * z - z * np.abs(z) ** 2
    assert np.allclose(m.f_rhs(x), np.stack((dz.real, dz.imag), axis=-1))
    assert np.allclose(m.f_rhs(np.zeros(2)), 0)


def test_periodic_frame():
    f = sl_periodic_frame(P, 20.0)
    assert f.alpha_P == pytest.approx(1.0, abs=1e-12)
    assert f.d2H == pytest.approx(-2.0)
    assert f.d1H == pytest.approx(2.0)
    assert np.allclose(f.J0, np.diag([-2.0, 0.0]))
    assert np.allclose(f.T_mat, np.eye(2), atol=1e-12)
    assert not f.degenerate
    assert sl_periodic_frame(P, 0.5).degenerate
    with pytest.raises(PreconditionError):
        sl_periodic_frame(SLParams(-1.0, PI), 1.0)


@given(st.floats(0.05, 30.0))
def test_alpha_p_is_cos(tau):
    f = sl_periodic_frame(P, tau)
    assert f.alpha_P == pytest.approx(math.cos(PI * tau), abs=1e-12)
    assert f.alpha_P == pytest.approx(-(f.d2H / f.d1H).real, abs=1e-12)


def test_d1h_by_central_difference():
    for tau in (2.0, 2.6, 20.0):
        h = 1e-6
        # d/dlam of H(lam, 0) = lam^2 + 2 alpha lam at 0, via H(i omega, 0) with lam = i omega
        d1 = (sl_char_H(h, 0, P, tau) - sl_char_H(-h, 0, P, tau)) / (2j * h)
        assert d1 == pytest.approx(2.0 * P.alpha, abs=1e-6)
        d2 = (sl_char_H(0, h, P, tau) - sl_char_H(0, -h, P, tau)) / (2 * h)
        f = sl_periodic_frame(P, tau)
        assert d2 == pytest.approx(f.d2H, abs=1e-6)
        assert -(d2 / d1).real == pytest.approx(f.alpha_P, abs=1e-6)


def test_char_h_examples():
    assert sl_char_H(0.0, 0.0, P, 20.0) == 0
    assert abs(sl_char_H(0.0, 2 * P.alpha * math.cos(PI * 20.0), P, 20.0)) < 1e-12
    assert sl_char_H(1.0, 0.0, P, 20.0) == pytest.approx(2j - 1)


def test_g_pm_labels():
    for tau in (20.0, 1.0, 2.6, 0.3):
        gp, gm = sl_g_pm(0.0, P, tau)
        assert abs(gm) < 1e-15
        assert gp == pytest.approx(2 * P.alpha * math.cos(PI * tau), abs=1e-12)


def test_g_pm_continuous():
    ws = np.linspace(-10, 10, 20001)
    for tau in (20.0, 2.6):
        g = np.array([sl_g_pm(w, P, tau) for w in ws])
        assert np.max(np.abs(np.diff(g, axis=0))) < 0.01


@given(st.floats(-50, 50), st.floats(0.01, 50), st.floats(0.01, 5), st.floats(0.1, 10))
def test_char_h_roots(omega, tau, alpha, beta):
    p = SLParams(alpha, beta)
    gp, gm = sl_g_pm(omega, p, tau)
    scale = max(1.0, abs(gp) ** 2, abs(gm) ** 2)
    assert abs(sl_char_H(omega, gp, p, tau)) <= 1e-9 * scale
    assert abs(sl_char_H(omega, gm, p, tau)) <= 1e-9 * scale
    c = math.cos(beta * tau)
    assert abs(gp + gm - 2 * c * (alpha + 1j * omega)) <= 1e-10 * max(1.0, abs(gp) + abs(gm))
    assert abs(gp * gm - (2 * alpha * omega * 1j - omega ** 2)) <= 1e-10 * scale


def test_asymptotic_singularity():
    b = sl_periodic_asymptotic(-0.08, P, 20.0, (-1, 1), samples=201)
    minus = b[1]
    assert np.isinf(minus.gamma[100]) and minus.omega[100] == 0
    left, right = minus.gamma[90:100], minus.gamma[101:111]
    assert np.all(np.diff(left) > 0) and np.all(np.diff(right) < 0)


def test_sigma_zero_roots():
    rs = sl_periodic_exact_spectrum(0.0, P, 20.0)
    assert np.allclose(sorted(rs.values(), key=lambda z: z.real), [-2.0, 0.0], atol=1e-10)
    rs = sl_periodic_exact_spectrum(0.0, SLParams(0.4, 2.0), 3.0)
    assert np.allclose(sorted(rs.values(), key=lambda z: z.real), [-0.8, 0.0], atol=1e-10)


def test_continuity_small_sigma():
    eps = 1e-4
    # the perturbation enters as eps * exp(-lam tau), so the root at -2 alpha is only
    # O(eps) close when eps * exp(2 alpha tau) is small
    vals = sl_periodic_exact_spectrum(-eps, P, 1.0).values()
    for z0 in (0.0, -2.0):
        assert np.min(np.abs(vals - z0)) < 10 * eps
    vals = sl_periodic_exact_spectrum(-eps, P, 20.0).values()
    assert np.min(np.abs(vals)) < 10 * eps


def _residual(lam, sigma, p, tau):
    c = math.cos(p.beta * tau)
    Y = sigma * cmath.exp(-lam * tau)
    # det(-lam I + diag(-2a, 0) + Y R) expanded directly from the matrix
    R = np.array([[c, -math.sin(p.beta * tau)], [math.sin(p.beta * tau), c]])
    M = -lam * np.eye(2) + np.diag([-2 * p.alpha, 0.0]) + Y * R
    return abs(np.linalg.det(M))


def test_exact_roots_solve_matrix_determinant():
    for tau, sigma in ((20.0, -0.08), (2.6, 0.1), (7.3, -0.3 + 0.2j)):
        rs = sl_periodic_exact_spectrum(sigma, P, tau)
        assert len(rs) > 10
        for r in rs:
            assert r.residual <= 1e-8
            assert _residual(r.root, sigma, P, tau) < 1e-8


def _dense_max_re(sigma, tau, n=3000, seed=0):
    rng = np.random.default_rng(seed)
    a, c = P.alpha, math.cos(PI * tau)
    best = -math.inf
    for s in rng.uniform(-0.3, 0.1, n) + 1j * rng.uniform(-3, 3, n):
        z = complex(s)
        for _ in range(60):
            Y = sigma * cmath.exp(-z * tau)
            F = z * z + 2 * a * z - 2 * c * Y * z - 2 * a * c * Y + Y * Y
            dY = -tau * Y
            dF = 2 * z + 2 * a - 2 * c * (dY * z + Y) - 2 * a * c * dY + 2 * Y * dY
            if abs(F) < 1e-11:
                best = max(best, z.real)
                break
            z -= F / dF
            if abs(z.real) > 1:
                break
    return best


@pytest.mark.parametrize("kappa,mu", [(0.02, 2.0), (0.03, 2.0), (0.04, 2.0), (0.03, 1 + 1j)])
def test_periodic_max_re_matches_dense_oracle(kappa, mu):
    rs = sl_periodic_exact_spectrum(-kappa * mu, P, 20.0)
    assert rs.max_real() == pytest.approx(_dense_max_re(-kappa * mu, 20.0), abs=1e-9)


def test_sigma_minus_008_is_marginal():
    # the dominant pair sits just right of the axis (frozen from the dense-seed oracle)
    rs = sl_periodic_exact_spectrum(-0.08, P, 20.0)
    assert rs.max_real() == pytest.approx(0.0006556834738719712, abs=1e-9)
    top = max(rs, key=lambda r: r.root.real).root
    assert abs(top.imag) == pytest.approx(0.079, abs=1e-3)


def test_sync_direction():
    assert sl_sync_direction(P, 20.0) == 1
    assert sl_sync_direction(P, 1.0) == -1
    for tau in (0.5, 2.5):
        with pytest.raises(PreconditionError, match="excluded"):
            sl_sync_direction(P, tau)


def test_map_sign_structure():
    smap = sl_stability_map([-0.1, 0.0, 0.1], [2.0, 2.6], P)
    assert smap.max_re.shape == (2, 3)
    assert smap.max_re[0, 0] < 0 < smap.max_re[0, 2]
    assert smap.max_re[1, 2] < 0 < smap.max_re[1, 0]
    assert np.allclose(smap.max_re[:, 1], 0.0, atol=1e-12)
    assert not smap.degenerate.any()
    assert sl_stability_map([0.1], [0.5], P).degenerate[0]


def test_map_independent_of_workers(tmp_path):
    a = sl_stability_map([-0.2, 0.2], [1.0, 3.0], P, workers=1)
    b = sl_stability_map([-0.2, 0.2], [1.0, 3.0], P, workers=2)
    assert np.array_equal(a.max_re, b.max_re)
    write_map_csv(tmp_path / "a.csv", a)
    write_map_csv(tmp_path / "b.csv", b)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "sigma,tau,max_re_lambda,degenerate_flag"


def test_map_requires_periodic():
    with pytest.raises(PreconditionError):
        sl_stability_map([0.1], [1.0], SLParams(-1.0, PI))


def test_kappa_c_periodic():
    spec = laplacian_spectrum(gen_directed_ring(4))
    w20 = sl_kappa_c_periodic(P, 20.0, spec, blocks="spectral_radius")
    w40 = sl_kappa_c_periodic(P, 40.0, spec, blocks="spectral_radius")
    assert 0.03 <= w20.kappa_c <= 0.05
    assert w40.kappa_c < w20.kappa_c
    assert w20.direction == 1 and w20.monotone and not w20.empty
    all20 = sl_kappa_c_periodic(P, 20.0, spec, blocks="all")
    assert all20.kappa_c < w20.kappa_c
    assert all20.kappa_c == pytest.approx(0.02778, abs=2e-4)
    with pytest.raises(PreconditionError):
        sl_kappa_c_periodic(P, 0.5, spec)
    with pytest.raises(InvalidInputError):
        sl_kappa_c_periodic(P, 20.0, spec, blocks="some")
