import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from csvt import channels as chn
from csvt import estimators as est
from csvt import linalg as la
from csvt.circuit import Circuit
from csvt.errors import CapError, ValidationError

seeds = st.integers(0, 2**31 - 1)


# --- reports and sampling helpers ----------------------------------------------

def test_report_contract():
    r = est.EstimateReport(1.5, 1.25, 3, 0, "exact", 0, {"a": 0.1})
    assert r.abs_error == 0.25 and r.to_dict()["abs_error"] == 0.25
    with pytest.raises(ValueError):
        est.EstimateReport(1.0, 1.0, 3, 5, "exact", 0)
    with pytest.raises(ValueError):
        est.EstimateReport(1.0, 1.0, 3, 0, "exact", 0, {"a": -1})
    with pytest.raises(ValueError):
        est.EstimateReport(1.0, 1.0, 3, 0, "guess", 0)


def test_chernoff_formula():
    assert est.chernoff_samples(0.01, 0.05) == math.ceil(math.log(40) / (2e-4))
    with pytest.raises(ValueError):
        est.chernoff_samples(0.0, 0.05)


def test_median_of_means_trivial():
    x = np.arange(10.0)
    assert est.median_of_means(x, 1) == pytest.approx(x.mean())
    assert est.median_of_means(np.full(12, 3.5), 4) == 3.5
    with pytest.raises(ValueError):
        est.median_of_means([], 1)


def test_median_of_means_heavy_tail():
    wins = 0
    for s in range(1000):
        draws = np.random.default_rng(s).standard_t(1.5, size=300)
        wins += abs(est.median_of_means(draws, 15)) <= abs(draws.mean())
    assert wins >= 600


# --- Hadamard test --------------------------------------------------------------

def test_hadamard_exact_cases(rng):
    rho = la.random_density(3, rng)
    assert est.hadamard_test(np.eye(3), rho).estimate == pytest.approx(1.0, abs=1e-14)
    assert est.hadamard_test(la.PAULI_Z, np.eye(2) / 2).estimate == pytest.approx(0, abs=1e-15)


def test_hadamard_sampled():
    th = 0.7
    u = la.expm(-1j * th * la.PAULI_Z)
    rep = est.hadamard_test(u, np.eye(2) / 2, "sampled", n_samples=10_000, seed=3)
    assert rep.target_exact == pytest.approx(math.cos(th))
    assert rep.target_exact == pytest.approx(0.7648, abs=1e-4)
    sigma = 2 * math.sqrt(rep.extra["p0"] * (1 - rep.extra["p0"]) / 10_000)
    assert rep.abs_error <= 5 * sigma and rep.samples == 10_000


def test_hadamard_block_encoding(rng):
    from csvt import qsp
    a = la.random_hermitian(2, rng, norm=0.9)
    be = qsp.exact_poly_be(a, qsp.make_poly([0, 1.0], "odd"))
    rho = la.random_density(2, rng)
    rep = est.hadamard_test(be, rho)
    assert rep.estimate == pytest.approx(np.trace(rho @ a).real, abs=1e-12)


# --- moments -------------------------------------------------------------------

def test_moment_identity_channel():
    rep = est.moment_pipeline(chn.identity_channel(2), 4, 1e-2, k=1.0)
    assert rep.extra["raw_target"] == pytest.approx(1 / (2 * np.pi**2), rel=1e-12)
    assert rep.extra["raw_estimate"] == pytest.approx(1 / (2 * np.pi**2), abs=1e-12)
    assert rep.estimate == pytest.approx(0.25, abs=1e-6)


def test_moment_completely_depolarizing():
    rep = est.moment_pipeline(chn.completely_depolarizing(2), 4, 1e-2)
    assert rep.estimate == pytest.approx(0.0625, abs=1e-6)


@given(seeds, st.sampled_from([2, 3]), st.sampled_from([3.0, 4.0, 4.5, 6.0]))
def test_moment_pipeline_within_eps(seed, d, q):
    ch = chn.random_channel(d, d * d, seed)
    rep = est.moment_pipeline(ch, q, 1e-2)
    assert rep.abs_error <= 1e-2 / 4 + 1e-9
    assert sum(rep.budget.values()) == pytest.approx(1e-2)
    assert rep.samples == 0


def test_moment_circuit_matches_closed_form():
    ch = chn.random_channel(2, 4, 6)
    rep = est.moment_pipeline(ch, 4, 1e-2)
    assert 2 * rep.extra["p0"] - 1 == pytest.approx(rep.extra["raw_target"], abs=1e-12)


def test_moment_sampled_unbiased():
    ch = chn.random_channel(2, 4, 17)
    exact = est.moment_pipeline(ch, 4, 1e-2).estimate
    vals = np.array([est.moment_pipeline(ch, 4, 1e-2, mode="sampled", seed=s, n_samples=20_000).estimate
                     for s in range(200)])
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - exact) <= 3 * se


def test_moment_guards():
    ch = chn.random_channel(2, 4, 0)
    with pytest.raises(ValueError):
        est.moment_pipeline(ch, 2, 1e-2)
    with pytest.raises(CapError):
        est.moment_pipeline(chn.random_channel(3, 9, 0), 4, 0.5, encoder="approx")
    with pytest.raises(CapError):
        est.moment_pipeline(ch, 3, 1e-2, encoder="approx")


@pytest.mark.slow
def test_moment_approx_encoder_converges():
    ch = chn.random_channel(2, 4, 7)
    exact = est.moment_pipeline(ch, 4, 0.5)
    errs = [abs(est.moment_pipeline(ch, 4, 0.5, encoder="approx", n_steps=n).estimate - exact.estimate)
            for n in (16, 64)]
    assert errs[1] < errs[0] / 2.5


def test_swap_moment_cases():
    assert est.swap_moment(chn.identity_channel(2), 2) == pytest.approx(1.0)
    assert est.swap_moment(chn.completely_depolarizing(2), 2) == pytest.approx(0.25)
    with pytest.raises(CapError):
        est.swap_moment(chn.identity_channel(3), 4)
    with pytest.raises(ValueError):
        est.swap_patterns(3)


@given(seeds, st.sampled_from([(2, 2), (2, 4), (3, 2)]))
def test_swap_moment_matches_svd(seed, dq):
    d, q = dq
    ch = chn.random_channel(d, d * d, seed)
    assert est.swap_moment(ch, q) == pytest.approx(chn.moment_exact(ch, q), abs=1e-8)


# --- first moment ---------------------------------------------------------------

def test_first_moment_named():
    ident = est.first_moment_fc(chn.identity_channel(2), 0.1)
    assert ident.target_exact == pytest.approx(2) and ident.abs_error <= 0.1
    assert ident.estimate - 1 >= 0.9
    dep = est.first_moment_fc(chn.completely_depolarizing(2), 0.1)
    assert dep.target_exact == pytest.approx(0.5) and dep.abs_error <= 0.1


def test_first_moment_level_count():
    rep = est.first_moment_fc(chn.identity_channel(2), 0.1)
    e1 = rep.extra["eps1"]
    assert rep.extra["L"] == math.ceil(2 * 4 / (np.pi * e1) + 0.5) == 39


@pytest.mark.parametrize("seed", range(20))
def test_first_moment_truncation(seed):
    ch = chn.random_channel(2, 4, seed)
    rep = est.first_moment_fc(ch, 0.1)
    assert abs(rep.extra["truncation_only"] - rep.target_exact) <= rep.extra["eps1"]
    for q in (1.5, 2, 3):
        assert chn.moment_exact(ch, q) <= rep.estimate + 0.1


@pytest.mark.parametrize("ch", [chn.completely_depolarizing(2), chn.measure_prepare(2, 4), chn.measure_prepare(3, 5)],
                         ids=["depolarizing", "measure_prepare_2", "measure_prepare_3"])
def test_entanglement_breaking_witness(ch):
    assert est.first_moment_fc(ch, 0.1).estimate <= 1 + 0.1


def test_first_moment_sampled():
    ch = chn.random_channel(2, 4, 2)
    rep = est.first_moment_fc(ch, 0.1, mode="sampled", seed=5)
    assert rep.samples > 0 and rep.abs_error <= 0.1


def test_first_moment_approx_levels():
    ch = chn.random_channel(2, 4, 4)
    rep = est.first_moment_fc(ch, 0.1, approx_levels=1)
    assert rep.extra["approx_trace_error"][0] <= 2 * 4 * rep.extra["eps_terms"][0]
    assert rep.abs_error <= 0.1
    with pytest.raises(CapError):
        est.first_moment_fc(ch, 0.1, approx_levels=4)


# --- samplizer ------------------------------------------------------------------

def single_query(d=2):
    c = Circuit((2, d))
    c.unitary_op(la.HADAMARD, [0])
    c.query("U", [0, 1])
    c.unitary_op(la.HADAMARD, [0])
    return c


def test_samplizer_convergence():
    rho = la.proj(0, 2)
    ups = [est.samplize(single_query(), rho, 0.1, n_steps=n)[1].bracket[1] for n in (8, 16, 32, 64)]
    assert all(b < a for a, b in zip(ups, ups[1:]))
    assert 1.6 <= ups[0] / ups[1] <= 2.4 and 1.6 <= ups[2] / ups[3] <= 2.4


def test_samplizer_sample_count_grows():
    rho = la.random_density(2, np.random.default_rng(1))
    counts = [est.samplize(single_query(), rho, delta)[1].samples for delta in (0.2, 0.1, 0.05)]
    assert counts[1] >= 2 * counts[0] and counts[2] >= 2 * counts[1]


def test_samplizer_mixed_state_consistency():
    rho = np.eye(2) / 2
    approx, rep = est.samplize(single_query(), rho, 0.1)
    w = est.state_query_unitary(rho)
    ideal_u = single_query().unitary({"U": w, "U_dag": la.dag(w)})
    inp = np.kron(la.proj(0, 2), rho)
    out_a = chn.apply_liouville(approx, inp)
    out_i = ideal_u @ inp @ la.dag(ideal_u)
    assert la.trace_distance(out_a, out_i) <= rep.bracket[1] + 1e-12
    assert rep.queries == 1 and rep.eps_per_query == pytest.approx(0.1)


def test_state_query_block():
    rho = la.random_density(2, np.random.default_rng(3))
    u = est.state_query_unitary(rho)
    np.testing.assert_allclose(u[:2, :2], la.herm_fn(rho / 2, np.sin), atol=1e-12)


def test_samplizer_guards():
    with pytest.raises(ValueError):
        est.samplize(Circuit((2, 2)), np.eye(2) / 2, 0.1)
    with pytest.raises(ValueError):
        est.samplizer_steps(1.5)


# --- unital spectrum ------------------------------------------------------------

def test_unital_spectrum_identity():
    np.testing.assert_allclose(est.unital_spectrum(chn.identity_channel(2)), 1, atol=1e-12)
    with pytest.raises(ValidationError):
        est.unital_spectrum(chn.trace_and_replace(2))


@given(seeds)
def test_unital_spectrum_matches_svd(seed):
    ch = chn.random_unital_channel(2, seed)
    np.testing.assert_allclose(est.unital_spectrum(ch), chn.spectrum(ch).singular_values, atol=1e-7)
