import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import chebyshev as C
from scipy.special import polygamma

from csvt import channels as chn
from csvt import linalg as la
from csvt import qsp
from csvt.qsp import PhaseSequence

seeds = st.integers(0, 2**31 - 1)


def scaled_arcsin(x):
    return 2 / np.pi * np.arcsin(np.clip(x, -1, 1))


def arcsin_cheb_exact(n):
    """Chebyshev coefficients of (2/pi) arcsin: with x = cos t the function is 1 - 2t/pi."""
    k = np.arange(n + 1)
    c = np.zeros(n + 1)
    c[1::2] = 8 / (np.pi**2 * k[1::2] ** 2)
    return c


def rotation_block(x):
    s = np.sqrt(1 - x * x)
    return qsp.BlockEncoding(np.array([[x, s], [s, -x]], dtype=complex), 1.0, 1, 0.0, 1)


def dilation(a):
    return qsp.exact_poly_be(a, qsp.make_poly([0.0, 1.0], "odd"))


# --- Chebyshev fits ------------------------------------------------------------

def test_cheb_fit_polynomials():
    np.testing.assert_allclose(qsp.cheb_fit(lambda x: C.chebval(x, [0, 0, 0, 1]), 3).coeffs, [0, 0, 0, 1],
                               atol=1e-12)
    np.testing.assert_allclose(qsp.cheb_fit(lambda x: x * x, 2).coeffs, [0.5, 0, 0.5], atol=1e-12)


def test_cheb_fit_arcsin_degree_31():
    p = qsp.cheb_fit(scaled_arcsin, 31)
    # quadrature on 4 * degree nodes aliases the slowly decaying tail into the kept coefficients
    np.testing.assert_allclose(p.coeffs[:32], arcsin_cheb_exact(31), atol=3e-5)
    x = np.linspace(-0.5, 0.5, 20001)
    truncation = np.max(np.abs(C.chebval(x, arcsin_cheb_exact(31)) - scaled_arcsin(x)))
    err = qsp.grid_error(p, scaled_arcsin, -0.5, 0.5)
    assert abs(err - truncation) <= 2e-5
    assert err == pytest.approx(4.2417e-4, abs=1e-7)
    assert p.parity == "odd"


def test_averaged_poly():
    f = lambda x: np.abs(x) ** 1.5 / 2
    np.testing.assert_allclose(qsp.averaged_poly(f, 1).coeffs, qsp.cheb_fit(f, 1).coeffs, atol=1e-15)
    assert qsp.grid_error(qsp.averaged_poly(f, 32), f) < qsp.grid_error(qsp.averaged_poly(f, 8), f)
    half_sq = lambda x: x * x / 2
    for d in (8, 32):
        assert qsp.grid_error(qsp.averaged_poly(half_sq, d), half_sq) <= 1e-12
    p = qsp.averaged_poly(f, 6)
    assert p.parity == "even" and np.max(np.abs(p.coeffs[1::2])) == 0


@given(st.integers(1, 20))
def test_averaged_poly_bounded_by_truncations(d):
    f = lambda x: np.abs(x) ** 1.5 / 2
    x = np.linspace(-1, 1, 2001)
    avg = qsp.averaged_poly(f, d)(x)
    full = qsp.cheb_fit(f, 2 * d - 1).coeffs
    parts = np.array([C.chebval(x, full[: k + 1]) for k in range(d, 2 * d)])
    assert np.all(avg <= parts.max(axis=0) + 1e-12)


def test_power_target():
    p4 = qsp.power_target(4, 0.3)
    assert p4.degree == 2 and p4.info["error"] <= 1e-12
    p3 = qsp.power_target(3, 1e-2)
    assert p3.info["error"] <= 1e-2 and p3.sup_bound <= 1
    ratio = qsp.power_target(3, 1e-3).degree / p3.degree
    assert 5 <= ratio <= 20
    p45 = qsp.power_target(4.5, 1e-2)
    x = np.linspace(-1, 1, 2001)
    assert p45.parity == "even" and np.max(np.abs(p45(x) - p45(-x))) / 2 <= 1e-12
    with pytest.raises(ValueError):
        qsp.power_target(2, 0.1)


@given(st.floats(2.05, 8.0))
def test_power_exponents(q):
    r, alpha = qsp.power_exponents(q)
    assert r >= 1 and r % 2 == 1 and r + alpha == pytest.approx(q - 2)
    assert -1 < alpha <= 1


def test_arcsin_poly_contract():
    for eps in (1e-2, 1e-3, 1e-4):
        p = qsp.arcsin_poly(eps)
        assert p.parity == "odd" and p.sup_bound <= 1
        assert qsp.grid_error(p, scaled_arcsin, -0.5, 0.5) <= eps
    assert [qsp.arcsin_poly(e).degree for e in (1e-2, 1e-3, 1e-4)] == [3, 5, 7]


# --- Fourier series of |x| -----------------------------------------------------

def test_fourier_series():
    x = np.linspace(-1, 1, 10001)
    assert np.max(np.abs(np.abs(x) - qsp.fourier_partial(x, 100))) <= 4 / (np.pi * 199) + 1e-9
    # the value at zero is the tail (1/pi) psi'(L + 1/2) of the odd inverse squares
    at0 = float(qsp.fourier_partial(0.0, 50))
    assert at0 == pytest.approx(polygamma(1, 50.5) / np.pi, rel=1e-10)
    assert abs(at0) <= 0.007
    assert qsp.fourier_level(4, 0.1) == 26


@given(seeds)
def test_fourier_operator_identity(seed):
    ch = chn.random_channel(2, 4, seed)
    hp = chn.hermitize(chn.reshuffle(chn.choi(ch), 2))
    L = 26
    w = np.linalg.eigvalsh(hp)
    series = np.pi / 2 * hp.shape[0] - sum(wt * np.cos((2 * l - 1) * w).sum() for l, wt in qsp.fourier_cosine(L))
    assert abs(2 * la.trace_norm(chn.reshuffle(chn.choi(ch), 2)) - series) <= qsp.fourier_tail(4, L) + 1e-9


# --- scalar QSP and phase synthesis --------------------------------------------

@pytest.mark.parametrize("n", range(1, 9))
def test_zero_phases_give_chebyshev(n):
    x = np.linspace(-1, 1, 101)
    t_n = C.chebval(x, [0] * n + [1])
    np.testing.assert_allclose(qsp.qsp_response(np.zeros(n + 1), x), t_n, atol=1e-10)


def test_synthesis_half_square():
    p = qsp.make_poly([0.25, 0, 0.25], "even")
    ph = qsp.synthesize_phases(p)
    x = np.linspace(-1, 1, 1000)
    assert np.max(np.abs(ph.realized(x) - x * x / 2)) <= 1e-8
    assert ph.convention == qsp.CONVENTION


def test_synthesis_chebyshev_basis():
    p = qsp.make_poly([0, 0, 0, 0, 0, 1], "odd")
    ph = qsp.synthesize_phases(p)
    x = np.linspace(-1, 1, 1000)
    assert np.max(np.abs(ph.realized(x) - C.chebval(x, p.coeffs))) <= 1e-8


def test_synthesis_arcsin_degree_15():
    p = qsp.cheb_fit(scaled_arcsin, 15)
    ph = qsp.synthesize_phases(p, tol=1e-6)
    assert ph.degree == 15
    x = np.linspace(-1, 1, 1000)
    assert np.max(np.abs(ph.realized(x) - p(x))) <= 1e-6
    np.testing.assert_allclose(ph.realized(-x), -ph.realized(x), atol=1e-6)


def test_synthesis_rejects_bad_input():
    with pytest.raises(ValueError):
        qsp.synthesize_phases(qsp.make_poly([0, 2.0], "odd"))
    with pytest.raises(ValueError):
        qsp.synthesize_phases(qsp.make_poly([0.1, 0.5], "none"))


# --- QSVT on block encodings ---------------------------------------------------

def test_qsvt_scalar_rotation():
    out = qsp.qsvt_apply(rotation_block(0.4), PhaseSequence(np.zeros(4)))
    assert out.block()[0, 0].real == pytest.approx(-0.944, abs=1e-10)
    assert out.num_ancillas == 2


def test_qsvt_degree_one_keeps_block(rng):
    a = la.random_hermitian(3, rng, norm=0.9)
    out = qsp.qsvt_apply(dilation(a), PhaseSequence(np.zeros(2)))
    np.testing.assert_allclose(out.block(), a, atol=1e-12)


def test_qsvt_realized_half_square(rng):
    a = la.random_hermitian(4, rng, norm=0.95)
    ph = qsp.synthesize_phases(qsp.make_poly([0.25, 0, 0.25], "even"))
    out = qsp.qsvt_apply(dilation(a), ph)
    np.testing.assert_allclose(out.block(), a @ a / 2, atol=1e-8)
    assert la.is_unitary(out.unitary)


@given(seeds)
def test_qsvt_odd_on_zero_block(seed):
    ph = qsp.synthesize_phases(qsp.arcsin_poly(1e-3))
    out = qsp.qsvt_apply(dilation(np.zeros((2, 2))), ph)
    np.testing.assert_allclose(out.block(), 0, atol=1e-12)


def test_qsvt_non_hermitian_block(rng):
    # singular value transform: odd P maps A = W S V^dag to W P(S) V^dag
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    m *= 0.9 / la.op_norm(m)
    w, s, v = la.svd(m)
    big = np.block([[m, la.psd_sqrt(np.eye(3) - m @ la.dag(m))],
                    [la.psd_sqrt(np.eye(3) - la.dag(m) @ m), -la.dag(m)]])
    be = qsp.BlockEncoding(big, 1.0, 1, 0.0, 3)
    p = qsp.make_poly([0, 0, 0, 1], "odd")
    out = qsp.qsvt_apply(be, qsp.synthesize_phases(p))
    np.testing.assert_allclose(out.block(), w @ np.diag(p(s)) @ la.dag(v), atol=1e-8)


def test_exact_poly_be(rng):
    a = np.diag([0.3, -0.7])
    be = dilation(a)
    np.testing.assert_allclose(be.block(), a)
    assert la.is_unitary(be.unitary) and be.epsilon == 0
    h = la.random_hermitian(2, rng, norm=0.8)
    half_sq = qsp.make_poly([0.25, 0, 0.25], "even")
    np.testing.assert_allclose(qsp.exact_poly_be(h, half_sq).block(), h @ h / 2, atol=1e-14)
    with pytest.raises(ValueError):
        qsp.exact_poly_be(np.eye(2) * 1.5, half_sq)


def test_qsvt_matches_exact_dilation(rng):
    a = la.random_hermitian(4, rng, norm=0.9)
    p = qsp.arcsin_poly(1e-4)
    ph = qsp.synthesize_phases(p, tol=1e-10)
    via_qsvt = qsp.qsvt_apply(dilation(a), ph).block()
    np.testing.assert_allclose(via_qsvt, qsp.exact_poly_be(a, p).block(), atol=1e-9)


@given(seeds)
def test_spectral_mapping(seed):
    r = np.random.default_rng(seed)
    a = la.random_hermitian(4, r, norm=1.0)
    p = qsp.power_target(3.5, 5e-2)
    out = np.linalg.eigvalsh(qsp.exact_poly_be(a, p).block())
    np.testing.assert_allclose(np.sort(out), np.sort(p(np.linalg.eigvalsh(a))), atol=1e-9)


def test_make_poly_parity():
    assert qsp.make_poly([0, 1, 0, 0.2]).parity == "odd"
    assert qsp.make_poly([1, 0, 0.2]).parity == "even"
    # a declared parity projects away the other half of the coefficients
    np.testing.assert_array_equal(qsp.make_poly([1, 0.5], "even").coeffs, [1, 0])
