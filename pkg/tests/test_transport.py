import math

import numpy as np
import pytest

from nonrecip.greens import build_matrix, greens_dense, scaling_factors
from nonrecip.model import FrozenGamma, ModelParams, markovian_gamma
from nonrecip.momentum import dissipationless_mode
from nonrecip.quadrature import integrate_real_line
from nonrecip.transport import (
    LeadConfig,
    current_markovian_lyapunov,
    current_markovian_negf,
    current_nonmarkovian,
    fermi,
    lyapunov_steady_state,
    lyapunov_vectorized,
    markovian_hamiltonian,
    source_matrix,
    transmission,
)


@pytest.fixture
def fig3():
    return ModelParams(gamma=0.5, beta=10.0)


def test_fermi_limits():
    w = np.array([-1.0, 0.0, 1.0])
    np.testing.assert_array_equal(fermi(w, 0.0, math.inf), [1.0, 0.5, 0.0])
    np.testing.assert_array_equal(fermi(w, -math.inf, 10.0), 0.0)
    assert fermi(0.0, 0.0, 10.0) == pytest.approx(0.5)


def test_reciprocal_transmission():
    p = ModelParams(g_b=0.0, n_sites=30, eta=1e-6)
    w = np.linspace(-4, 4, 201)
    np.testing.assert_array_equal(transmission(p, None, w, "+"), transmission(p, None, w, "-"))


def test_transmission_matches_dense(fig2d):
    w = -0.3
    g = greens_dense(build_matrix(fig2d, None, w))
    assert transmission(fig2d, None, w, "+") == pytest.approx(abs(g[-1, 0]) ** 2, rel=1e-10)
    assert transmission(fig2d, None, w, "-") == pytest.approx(abs(g[0, -1]) ** 2, rel=1e-10)


def test_unidirectional_blocking(fig2d):
    w_star = dissipationless_mode(fig2d).omega_star
    tp = transmission(fig2d, None, w_star, "+")
    tm = transmission(fig2d, None, w_star, "-")
    assert tm < 1e-2 * tp
    w = np.concatenate([np.linspace(-4, w_star - 1.0001, 200), np.linspace(w_star + 1.0001, 4, 300)])
    ratio = transmission(fig2d, None, w, "+") / transmission(fig2d, None, w, "-")
    assert np.all((ratio >= 1 / 3) & (ratio <= 3))


def test_no_current_without_lead_coupling(fig2e):
    lc = LeadConfig(gamma=0.0, beta=100.0)
    assert current_nonmarkovian(fig2e, None, lc, 0.0).value == 0.0
    assert current_markovian_negf(fig2e, lc, 0.0).value == 0.0
    assert current_markovian_lyapunov(fig2e, lc, 0.0).value == 0.0


def test_no_current_from_empty_lead(fig2e):
    lc = LeadConfig.from_params(fig2e)
    assert current_nonmarkovian(fig2e, None, lc, -math.inf).value == 0.0
    assert current_markovian_negf(fig2e, lc, -60.0).value < 1e-200


def test_zero_temperature_current_is_truncated_integral(fig2e):
    p = fig2e.with_(n_sites=16, beta=math.inf)
    lc = LeadConfig.from_params(p)
    res = current_nonmarkovian(p, None, lc, -0.4, "+")
    ref = integrate_real_line(
        lambda w: transmission(p, None, w, "+"), [-7.5, -2.0, -1.0, -0.5, -0.4], upper=-0.4, rtol=1e-11
    ).value
    assert res.value == pytest.approx(p.gamma**2 * ref / (2 * math.pi), rel=1e-7)
    assert res.quadrature_error <= 1e-8 * res.value + 1e-14


def test_quadrature_error_is_honest(fig2e):
    p = fig2e.with_(n_sites=256)
    lc = LeadConfig.from_params(p)
    a = current_nonmarkovian(p, None, lc, -0.9, "+", rtol=1e-8)
    b = current_nonmarkovian(p, None, lc, -0.9, "+", rtol=5e-9)
    assert abs(a.value - b.value) <= a.quadrature_error


def test_direction_preference(fig2e):
    p = fig2e.with_(n_sites=64)
    lc = LeadConfig.from_params(p)
    for mu in (-1.5, -1.1, -0.9, -0.3, 0.5):
        ip = current_nonmarkovian(p, None, lc, mu, "+")
        im = current_nonmarkovian(p, None, lc, mu, "-")
        assert im.value <= ip.value
        assert im.value >= -1e-12


def test_log_value_survives_underflow(fig2e):
    p = fig2e.with_(n_sites=60_000)
    res = current_nonmarkovian(p, None, LeadConfig.from_params(p), -0.9, "-")
    assert res.value == 0.0 or res.value < 1e-300
    assert np.isfinite(res.log_value) and res.log_value < -700


def test_minus_current_rate_matches_scaling_factor(fig2e):
    # log I_- decays with slope 2 log f_-(omega_peak), omega_peak maximizing f_- below mu_d
    mu = -0.9
    lc = LeadConfig(beta=math.inf, gamma=fig2e.gamma)
    ns = [512, 1024, 2048, 4096]
    logs = [current_nonmarkovian(fig2e.with_(n_sites=n), None, lc, mu, "-").log_value for n in ns]
    slope = np.polyfit(ns, logs, 1)[0]
    w = np.linspace(-2.5 - 10 * (0.25 + 0.5 + 0.3), mu, 20001)
    f = scaling_factors(fig2e, None, w).f_minus
    assert slope == pytest.approx(2 * math.log(f.max()), rel=0.1)


def test_markovian_hamiltonian_structure(fig3):
    p = fig3.with_(n_sites=5)
    h = markovian_hamiltonian(p, lead_gamma=0.5)
    gam = markovian_gamma(p)
    assert h[2, 2] == pytest.approx(p.delta_c - 1j * gam)
    assert h[0, 0] == pytest.approx(p.delta_c - 1j * gam - 0.25j)
    assert h[1, 0] == pytest.approx(-1 - 1j * np.exp(-1j * p.phi) * gam / 2)


def test_lyapunov_empty_input(fig3):
    corr = lyapunov_steady_state(fig3.with_(n_sites=10), LeadConfig(gamma=0.5, beta=10.0))
    assert np.max(np.abs(corr.c)) == 0.0


def test_lyapunov_two_sites_vs_vectorized(fig3):
    p = fig3.with_(n_sites=2)
    lc = LeadConfig(0.3, -0.2, beta=10.0, gamma=0.5)
    corr = lyapunov_steady_state(p, lc)
    h = markovian_hamiltonian(p, lead_gamma=lc.gamma)
    x = lyapunov_vectorized(h, source_matrix(p, lc))
    np.testing.assert_allclose(corr.c, x.T, atol=1e-12)


@pytest.mark.parametrize("method", ["eig", "schur", "vectorized"])
def test_lyapunov_methods_agree(fig3, method):
    p = fig3.with_(n_sites=12)
    lc = LeadConfig(-1.0, 0.4, beta=10.0, gamma=0.5)
    ref = lyapunov_steady_state(p, lc, method="auto")
    other = lyapunov_steady_state(p, lc, method=method)
    np.testing.assert_allclose(other.c, ref.c, atol=1e-12)


def test_lyapunov_physical_bounds(fig3):
    for n in (8, 32, 64):
        p = fig3.with_(n_sites=n)
        lc = LeadConfig(-1.0, 0.5, beta=10.0, gamma=0.5)
        corr = lyapunov_steady_state(p, lc)
        q = source_matrix(p, lc)
        assert corr.residual <= 1e-10 * np.max(np.abs(q))
        assert np.max(np.abs(corr.c - corr.c.conj().T)) <= 1e-10
        ev = np.linalg.eigvalsh(corr.c)
        assert ev.min() >= -1e-9 and ev.max() <= 1 + 1e-9


def test_vectorized_size_guard(fig3):
    with pytest.raises(ValueError):
        lyapunov_vectorized(np.eye(100), np.eye(100))


def test_lyapunov_fully_occupied_lead_matches_negf():
    p = ModelParams(n_sites=2, gamma=0.5, beta=10.0)
    lc = LeadConfig.from_params(p)
    i_lyap = current_markovian_lyapunov(p, lc, math.inf, "+").value
    s = FrozenGamma(markovian_gamma(p))
    integral = integrate_real_line(lambda w: transmission(p, s, w, "+"), [-3, -1, 0, 1, 3], rtol=1e-12).value
    assert i_lyap == pytest.approx(p.gamma**2 * integral / (2 * math.pi), rel=1e-9)


@pytest.mark.parametrize("mu", [-2.0, -1.0, 0.0, 1.0, 2.0])
def test_lyapunov_matches_negf(fig3, mu):
    for n in (8, 16, 32, 64):
        p = fig3.with_(n_sites=n)
        lc = LeadConfig.from_params(p)
        for d in "+-":
            a = current_markovian_negf(p, lc, mu, d).value
            b = current_markovian_lyapunov(p, lc, mu, d).value
            assert a == pytest.approx(b, rel=1e-4)


def test_lead_config_validation():
    with pytest.raises(ValueError):
        LeadConfig(gamma=-1.0)
    with pytest.raises(ValueError):
        LeadConfig(beta=0.0)
    with pytest.raises(ValueError):
        LeadConfig().driving(0.0, "x")


def test_plus_current_reaches_inverse_sqrt_law(fig2e):
    # the N^-1/2 law is asymptotic: 1 - f_+ grows only quadratically away from
    # omega*, so the local exponent settles near -1/2 only for N of order 1e4
    lc = LeadConfig.from_params(fig2e)
    ns = [16384, 65536]
    logs = [current_nonmarkovian(fig2e.with_(n_sites=n), None, lc, -0.9, "+").log_value for n in ns]
    slope = (logs[1] - logs[0]) / math.log(ns[1] / ns[0])
    assert slope == pytest.approx(-0.5, abs=0.02)
