import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonrecip import _kernels
from nonrecip.errors import SingularMatrixError
from nonrecip.greens import (
    EffectiveHamiltonian,
    build_matrix,
    corner_log_abs2,
    dense_residual,
    extended_greens_block,
    greens_dense,
    greens_element,
    greens_tridiagonal,
    scaling_factors,
    transfer_matrix,
)
from nonrecip.model import FrozenGamma, ModelParams, gamma_of_z, hoppings


def normwise(a, b):
    return np.max(np.abs(a - b)) / np.max(np.abs(b))


def test_build_matrix_hermitian_limit():
    p = ModelParams(g_b=0.0, gamma=0.0, n_sites=6)
    m = build_matrix(p, None, 0.7).to_dense()
    np.testing.assert_array_equal(m, m.conj().T)
    assert np.all(np.diag(m) == 0.7 - p.delta_c)
    assert np.all(np.diag(m, 1) == p.g)


def test_build_matrix_diagonal_and_leads(fig2c):
    z = -1.0
    h = build_matrix(fig2c, None, z, leads=False)
    gam = complex(gamma_of_z(fig2c, None, z))
    assert h.diag == pytest.approx(z - fig2c.delta_c + 1j * gam)
    hl = build_matrix(fig2c.with_(gamma=0.5), None, z, leads=True)
    assert hl.diagonal()[0] - h.diagonal()[0] == pytest.approx(0.25j)
    assert hl.diagonal()[-1] - h.diagonal()[-1] == pytest.approx(0.25j)
    assert hl.diagonal()[1] == h.diagonal()[1]


def test_dense_two_site_closed_form():
    d, a, b = 0.3 + 0.2j, -1.1 + 0.1j, -0.9 - 0.05j
    h = EffectiveHamiltonian(diag=d, off_upper=a, off_lower=b, n_sites=2)
    expected = np.array([[d, -a], [-b, d]]) / (d * d - a * b)
    np.testing.assert_allclose(greens_dense(h), expected, rtol=1e-14)
    np.testing.assert_allclose(greens_tridiagonal(h), expected, rtol=1e-13)


def test_dense_residual_random_tridiagonal():
    rng = np.random.default_rng(3)
    n = 64
    m = np.diag(rng.normal(size=n) + 1j * rng.normal(size=n) + 3.0)
    m += np.diag(rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1), 1)
    m += np.diag(rng.normal(size=n - 1) + 1j * rng.normal(size=n - 1), -1)
    assert dense_residual(m, greens_dense(m)) <= 1e-10


def test_dense_symmetric_inverse_is_symmetric():
    p = ModelParams(g_b=0.0, gamma=0.3, n_sites=20)
    g = greens_dense(build_matrix(p, None, 0.4))
    np.testing.assert_allclose(g, g.T, atol=1e-14)


def test_singular_matrix_detected():
    # two decoupled zero-energy sites: exactly singular
    h = EffectiveHamiltonian(diag=0j, off_upper=0j, off_lower=0j, n_sites=2)
    with pytest.raises(SingularMatrixError):
        greens_dense(h)


def test_element_matches_dense_in_band(fig2c):
    p = fig2c.with_(n_sites=128)
    rng = np.random.default_rng(11)
    for w in rng.uniform(-2, 2, 5):
        g = greens_dense(build_matrix(p, None, w))
        scale = np.max(np.abs(g))
        for row, col in [(128, 1), (1, 128), (64, 64), (3, 100), (100, 3)]:
            e = greens_element(p, None, w, row, col)
            assert abs(e - g[row - 1, col - 1]) <= 1e-9 * scale


def test_element_index_check(fig2c):
    with pytest.raises(IndexError):
        greens_element(fig2c, None, 0.1, 0, 1)


def test_reciprocal_corner_symmetry():
    p = ModelParams(g_b=0.0, gamma=0.5, n_sites=40)
    w = np.linspace(-3, 3, 31)
    np.testing.assert_array_equal(corner_log_abs2(p, None, w, "+"), corner_log_abs2(p, None, w, "-"))


def test_zero_phase_gives_symmetric_g():
    p = ModelParams(phi=0.0, n_sites=24)
    g = greens_tridiagonal(build_matrix(p, None, -0.3 + 0.05j))
    assert np.max(np.abs(g - g.T)) <= 1e-12 * np.max(np.abs(g))


@settings(max_examples=40, deadline=None)
@given(
    st.integers(2, 80),
    st.floats(-4, 4),
    st.floats(0, 1),
    st.floats(0, 2 * math.pi),
)
def test_recursion_matches_dense_property(n, re, im, phi):
    p = ModelParams(n_sites=n, phi=phi)
    h = build_matrix(p, None, complex(re, im))
    assert normwise(greens_tridiagonal(h), greens_dense(h)) <= 1e-9


def test_corner_log_matches_dense(fig2c):
    p = fig2c.with_(n_sites=50, gamma=0.5)
    w = np.array([-2.5, -1.0, -0.5, 0.3, 1.7])
    for d, idx in (("+", (-1, 0)), ("-", (0, -1))):
        ref = [abs(greens_dense(build_matrix(p, None, x))[idx]) ** 2 for x in w]
        np.testing.assert_allclose(np.exp(corner_log_abs2(p, None, w, d)), ref, rtol=1e-10)


def test_corner_log_no_overflow_large_n(fig2c):
    v = corner_log_abs2(fig2c.with_(n_sites=200_000), None, np.array([-1.0, 1.5]), "-")
    assert np.all(np.isfinite(v)) and np.all(v < -1000)


def test_kernel_paths_agree(fig2c):
    if not _kernels.HAVE_NUMBA:
        pytest.skip("numba not available")
    w = np.linspace(-4, 4, 101)
    a = corner_log_abs2(fig2c.with_(n_sites=777), None, w, "+", use_numba=True)
    b = corner_log_abs2(fig2c.with_(n_sites=777), None, w, "+", use_numba=False)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-10)
    d = np.linspace(1, 2, 9) + 0.1j
    prod = np.full(8, 0.3 + 0.1j)
    np.testing.assert_allclose(
        _kernels.minor_ratios(d, prod, use_numba=True), _kernels.minor_ratios(d, prod, use_numba=False)
    )


def test_env_flag_disables_numba():
    code = "from nonrecip import _kernels; print(_kernels.USE_NUMBA)"
    env = dict(os.environ, NONRECIP_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_extended_block_decoupled_limit():
    p = ModelParams(g_b=0.0, n_sites=6)
    z = 0.2 + 0.1j
    ext = extended_greens_block(p, None, z)
    ref = greens_dense(build_matrix(p, None, z, leads=False))
    np.testing.assert_allclose(ext, ref, atol=1e-14)


@pytest.mark.parametrize("edge_aux,uniform", [(False, False), (True, True)])
def test_extended_block_exact(fig2c, edge_aux, uniform):
    p = fig2c.with_(n_sites=8)
    for w in (-1.3, -0.5, 0.4):
        z = w + 0.1j
        ext = extended_greens_block(p, None, z, edge_aux=edge_aux)
        red = greens_dense(build_matrix(p, None, z, leads=False, uniform_edges=uniform))
        assert normwise(ext, red) <= 1e-9


def test_two_site_schur_complement():
    # one triangle at z = delta_b: each chain site picks up -i Gamma / 2 = -2 i g_b^2 / kappa
    p = ModelParams(n_sites=2, g_b=0.3, kappa=0.25)
    z = p.delta_b + 1e-3j
    ext = extended_greens_block(p, None, z)
    m_eff = np.linalg.inv(ext)
    bare = z - p.delta_c
    gam = complex(gamma_of_z(p, None, z))
    assert m_eff[0, 0] - bare == pytest.approx(0.5j * gam, rel=1e-12)
    assert gam == pytest.approx(4 * p.g_b**2 / p.kappa, rel=1e-2)
    ext2 = extended_greens_block(p, None, z, edge_aux=True)
    assert np.linalg.inv(ext2)[0, 0] - bare == pytest.approx(1j * gam, rel=1e-12)


def test_extended_block_rejects_frozen(fig2c):
    with pytest.raises(ValueError):
        extended_greens_block(fig2c, FrozenGamma(0.09), 0.1j)


def test_transfer_matrix_free_chain():
    p = ModelParams(g_b=0.0)
    t = transfer_matrix(p, None, 0.6)
    np.testing.assert_array_equal(t.as_array(), np.array([[0.6 - p.delta_c, -p.g**2], [1, 0]]))


def test_transfer_matrix_invariants(fig2c):
    rng = np.random.default_rng(5)
    for _ in range(100):
        z = complex(rng.uniform(-4, 4), rng.uniform(0, 1))
        t = transfer_matrix(fig2c, None, z)
        tp, tm = hoppings(fig2c, None, z)
        gam = complex(gamma_of_z(fig2c, None, z))
        assert abs(t.det - tp * tm) <= 1e-12 * abs(tp * tm)
        assert abs(t.trace - (z - fig2c.delta_c + 1j * gam)) <= 1e-12
        l1, l2 = t.eigenvalues()
        assert abs(l1) >= abs(l2)
        assert abs(l1 * l2 - t.det) <= 1e-12 * abs(t.det)


def test_scaling_factors_at_dissipationless_point(fig2c):
    sf = scaling_factors(fig2c, None, -1.0)
    assert sf.f_plus == pytest.approx(1.0, abs=1e-8)
    assert sf.f_minus < 0.999


def test_scaling_factors_free_chain_degenerate():
    p = ModelParams(g_b=0.0)
    sf = scaling_factors(p, None, np.array([-1.5, 0.0, 1.2]))
    np.testing.assert_allclose(sf.f_plus, 1.0, atol=1e-12)
    np.testing.assert_allclose(sf.f_minus, 1.0, atol=1e-12)
    assert np.all(sf.degenerate)


def test_scaling_factors_bounded(fig2c):
    sf = scaling_factors(fig2c, None, np.linspace(-4, 4, 2000))
    assert np.max(sf.f_plus) <= 1 + 1e-9 and np.max(sf.f_minus) <= 1 + 1e-9


@pytest.mark.parametrize("w", [-2.5, -0.7, 2.5])
def test_corner_decay_follows_scaling_factor(fig2c, w):
    # the subdominant eigenvalue must have died out by the smallest N
    l1, l2 = transfer_matrix(fig2c, None, w).eigenvalues()
    assert abs(l2 / l1) ** 64 < 1e-6
    ns = np.array([64, 128, 256, 512])
    p = fig2c.with_(gamma=0.5)
    logs = [0.5 * corner_log_abs2(p.with_(n_sites=int(n)), None, np.array([w]), "+")[0] for n in ns]
    slope = np.polyfit(ns, logs, 1)[0]
    expected = math.log(scaling_factors(fig2c, None, w).f_plus)
    assert expected < 0
    assert slope == pytest.approx(expected, rel=0.02)
