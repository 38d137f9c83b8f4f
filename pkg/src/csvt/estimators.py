"""Measurement-layer simulations: Hadamard tests, moment and first-moment estimators.

Circuits are simulated exactly as density matrices; "sampled" mode only
randomizes the terminal single-qubit measurement, so statistical error is
isolated from encoding error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import channels as chn
from . import encoding as enc
from . import linalg as la
from .circuit import Circuit, LocalChannel, controlled, liouville_of
from .errors import CapError, ValidationError
from .qsp import (BlockEncoding, PhaseSequence, arcsin_poly, exact_poly_be, fourier_cosine,
                  fourier_level, power_target, qsvt_circuit, synthesize_phases)

MODES = ("exact", "sampled")
FLAG_SIGMAS = 5.0


@dataclass
class EstimateReport:
    estimate: float
    target_exact: float
    queries: int
    samples: int
    mode: str
    seed: int
    budget: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    abs_error: float = field(init=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.mode == "exact" and self.samples != 0:
            raise ValueError("exact-expectation reports carry zero samples")
        if any(v < 0 for v in self.budget.values()):
            raise ValueError("budget terms must be non-negative")
        self.abs_error = abs(self.estimate - self.target_exact)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate, "target_exact": self.target_exact,
            "abs_error": self.abs_error, "queries": self.queries, "samples": self.samples,
            "mode": self.mode, "seed": self.seed, "budget": dict(self.budget),
            "extra": dict(self.extra),
        }


@dataclass
class BernoulliSampler:
    """Binary outcomes with P(0) = p0 drawn from a private seeded stream."""

    p0: float
    seed: int = 0

    def __post_init__(self):
        if not -1e-12 <= self.p0 <= 1 + 1e-12:
            raise ValueError(f"p0={self.p0} outside [0, 1]")
        self.p0 = float(min(1.0, max(0.0, self.p0)))
        self._rng = np.random.default_rng(self.seed)

    def zeros(self, n: int) -> int:
        return int(self._rng.binomial(n, self.p0))

    def mean_estimate(self, n: int) -> tuple[float, bool]:
        """(fraction of zeros, flag) where flag marks a > 5 sigma deviation."""
        frac = self.zeros(n) / n
        sigma = math.sqrt(self.p0 * (1 - self.p0) / n)
        flagged = abs(frac - self.p0) > FLAG_SIGMAS * sigma if sigma > 0 else frac != self.p0
        return frac, flagged


def chernoff_samples(eps: float, delta: float) -> int:
    """N with P(|mean - p| > eps) <= delta for Bernoulli draws (Hoeffding)."""
    if eps <= 0 or not 0 < delta < 1:
        raise ValueError("need eps > 0 and 0 < delta < 1")
    return math.ceil(math.log(2 / delta) / (2 * eps * eps))


def median_of_means(draws, groups: int) -> float:
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise ValueError("no draws")
    if groups < 1 or groups > draws.size:
        raise ValueError(f"groups={groups} must lie in [1, {draws.size}]")
    return float(np.median([g.mean() for g in np.array_split(draws, groups)]))


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")


def _hadamard_p0(u: np.ndarray, state: np.ndarray) -> float:
    """P(0) of the control after H, controlled-u, H on |0> kron state."""
    n = u.shape[0]
    c = Circuit((2, n))
    c.unitary_op(la.HADAMARD, [0]).unitary_op(controlled(u), [0, 1]).unitary_op(la.HADAMARD, [0])
    out = c.run(np.kron(la.proj(0, 2), state))
    return float(np.trace(out[:n, :n]).real)


def hadamard_test(u_or_be, rho: np.ndarray, mode: str = "exact", n_samples: int | None = None,
                  seed: int = 0, eps: float = 0.01, delta: float = 0.05) -> EstimateReport:
    """Estimate Re Tr(rho U), or Re Tr(rho A) for a block-encoded A."""
    _check_mode(mode)
    if isinstance(u_or_be, BlockEncoding):
        be = u_or_be
        if rho.shape[0] != be.system_dim:
            raise ValueError("state and encoded block dimensions differ")
        anc = be.unitary.shape[0] // be.system_dim
        state = np.kron(la.proj(0, anc), rho)
        u, alpha = be.unitary, be.alpha
        target = float(np.trace(rho @ be.block()).real)
    else:
        u = np.asarray(u_or_be)
        if u.shape != rho.shape:
            raise ValueError(f"unitary {u.shape} and state {rho.shape} differ in dimension")
        state, alpha = rho, 1.0
        target = float(np.trace(rho @ u).real)
    p0 = _hadamard_p0(u, state)
    if mode == "exact":
        return EstimateReport(alpha * (2 * p0 - 1), target, 1, 0, mode, seed, extra={"p0": p0})
    n = chernoff_samples(eps / (2 * alpha), delta) if n_samples is None else int(n_samples)
    frac, flagged = BernoulliSampler(p0, seed).mean_estimate(n)
    return EstimateReport(alpha * (2 * frac - 1), target, n, n, mode, seed,
                          budget={"eps_H": eps}, extra={"p0": p0, "flagged": flagged})


# --- singular-value moments ---------------------------------------------------

def moment_scale(d: int, k: float, q: float) -> float:
    """Factor turning the raw circuit quantity into S_q (see moment_pipeline)."""
    return 2 * np.pi ** (q - 2) * d ** (2 + (1 - k) * (q - 2) - q)


def raw_moment_target(ch: chn.KrausChannel, k: float, q: float) -> float:
    """(1/d^2) Tr[E_A^dag E_A <1|f((2/pi)H)|1>] for f(x) = x^(q-2) / 2."""
    d = ch.d
    sv = np.linalg.svd(chn.liouville(ch), compute_uv=False)
    return float(0.5 / d**2 * (np.pi * d ** (1 - k)) ** (2 - q) * np.sum(sv**q))


@lru_cache(maxsize=64)
def _power_poly(q: float, eps: float):
    return power_target(q, eps)


def _moment_input(d: int, m_anc: int, extra_lead: int) -> np.ndarray:
    """|0><0| control, |0..0> ancillas, |1><1|_X, (I/d)_S, |Phi+><Phi+|_AB."""
    ctrl = la.proj(0, 2)
    anc = la.proj(0, m_anc)
    lead = la.proj(0, 2**extra_lead) if extra_lead else np.ones((1, 1))
    sys = la.kron(la.proj(1, 2), np.eye(d) / d, la.max_entangled_state(d))
    return la.kron(ctrl, lead, anc, sys)


def _moment_circuit(d: int, kraus, m_dims, attach) -> Circuit:
    """Modified Hadamard test: registers (ctrl, *m_dims, S, A, B).

    ``m_dims`` are the leading registers of the block-encoding (ancillas and
    the X qubit); the encoding acts on them plus S and A. ``attach`` adds the
    controlled encoding to the circuit.
    """
    dims = (2,) + tuple(m_dims) + (d, d, d)
    s, b = len(dims) - 3, len(dims) - 1
    c = Circuit(dims)
    cs = controlled(la.swap(d))
    c.unitary_op(la.HADAMARD, [0])
    c.unitary_op(cs, [0, s, b])
    c.kraus_op(kraus, [s])
    c.unitary_op(cs, [0, s, b])
    attach(c)
    c.unitary_op(cs, [0, s, b])
    c.kraus_op(kraus, [b])
    c.unitary_op(cs, [0, s, b])
    c.unitary_op(la.HADAMARD, [0])
    return c


def _p0(out: np.ndarray) -> float:
    n = out.shape[0] // 2
    return float(np.trace(out[:n, :n]).real)


def moment_p0_exact(ch: chn.KrausChannel, m_unitary: np.ndarray) -> float:
    """Run the circuit with an exact M given as a unitary on (anc, X, S, A)."""
    d = ch.d
    m_anc = m_unitary.shape[0] // (2 * d * d)

    def attach(c):
        c.unitary_op(controlled(m_unitary), list(range(0, 5)))

    circ = _moment_circuit(d, ch.kraus_ops, (m_anc, 2), attach)
    return _p0(circ.run(_moment_input(d, m_anc, 0)))


def approx_moment_circuit(ch: chn.KrausChannel, power_phases: PhaseSequence,
                          arc_phases: PhaseSequence) -> Circuit:
    """Full stack: power QSVT over arcsin QSVT over the sin-H circuit, controlled.

    Registers: (ctrl, power LCU, arcsin LCU, s, X, S, A, B); the queries are
    "ccU" / "ccU_dag" on (ctrl, s, X, S, A).
    """
    d = ch.d
    sinc = enc.sin_h_circuit(d)                     # (s, X, Y, Z)
    arc = qsvt_circuit(sinc, [0], arc_phases.phases)  # (aLCU, s, X, Y, Z)
    pw = qsvt_circuit(arc, [0, 1], power_phases.phases)  # (pLCU, aLCU, s, X, Y, Z)
    cpw = pw.controlled()

    def attach(c):
        c.extend(cpw, list(range(7)))

    return _moment_circuit(d, ch.kraus_ops, (2, 2, 2, 2), attach)


def moment_pipeline(ch: chn.KrausChannel, q: float, eps: float, delta: float = 0.05,
                    k: float = 0.5, encoder: str = "exact", mode: str = "exact",
                    seed: int = 0, n_samples: int | None = None, n_steps: int | None = None,
                    unsafe: bool = False) -> EstimateReport:
    """Estimate S_q = d^-q sum sigma_i^q through the modified Hadamard test.

    The control qubit's P(0) equals 1/2 + Re(T)/2 with
    T = (1/d^2) Tr[E_A^dag E_A <1|M|1>] and M a block-encoding of
    P((2/pi)H), P ~ x^(q-2)/2. With the exact power function,
    T = (1/(2 d^2)) (pi d^(1-k))^-(q-2) sum sigma_i^q, which is rescaled to S_q.
    The budget eps is split into four equal parts (statistics, encoding,
    polynomial, channel approximation) in S_q units.
    """
    _check_mode(mode)
    if q <= 2:
        raise ValueError("moment_pipeline needs q > 2")
    if encoder not in ("exact", "approx"):
        raise ValueError("encoder must be 'exact' or 'approx'")
    d = ch.d
    h = chn.hermitized(ch, k, unsafe=unsafe)
    scale = moment_scale(d, k, q)
    part = eps / 4
    poly = _power_poly(float(q), float(min(0.5, part / scale)))
    exact_val = chn.moment_exact(ch, q)
    budget = {"eps_H": part, "eps_F": part, "eps_poly": part, "delta_prime": part}
    extra = {"raw_target": raw_moment_target(ch, k, q), "scale": scale, "degree": poly.degree,
             "poly_error_raw": poly.info["error"], "encoder": encoder, "k": k, "q": q}
    queries = 2  # two direct channel uses in the circuit
    if encoder == "exact":
        be = exact_poly_be(2 / np.pi * h, poly)
        p0 = moment_p0_exact(ch, be.unitary)
    else:
        if d != 2:
            raise CapError("the full approximate moment stack is capped at d = 2")
        if poly.degree > 8:
            raise CapError(f"power polynomial degree {poly.degree} exceeds the approx-stack cap 8")
        pw = synthesize_phases(poly, tol=1e-10)
        arc_eps = part / scale
        arc = synthesize_phases(arcsin_poly(arc_eps), tol=1e-10)
        circ = approx_moment_circuit(ch, pw, arc)
        counts = circ.query_counts()
        nq = sum(counts.values())
        per_query = part / scale / max(nq, 1)
        steps = n_steps or max(1, math.ceil(1 / per_query))
        fwd = enc.approx_U_EA(ch, k, steps, n_controls=2, with_distance=False, unsafe=unsafe)
        inv = enc.approx_U_EA(ch, k, steps, n_controls=2, inverse=True, with_distance=False,
                              unsafe=unsafe)
        impl = {"ccU": fwd.local(), "ccU_dag": inv.local()}
        p0 = _p0(circ.run(_moment_input(d, 8, 0), impl))
        queries += nq * 2 * steps
        extra |= {"n_steps": steps, "encoding_queries": nq, "arcsin_degree": arc.degree}
    extra["p0"] = p0
    if mode == "exact":
        raw = 2 * p0 - 1
        return EstimateReport(raw * scale, exact_val, queries, 0, mode, seed, budget,
                              extra | {"raw_estimate": raw})
    raw_eps = part / scale
    n = chernoff_samples(raw_eps / 2, delta) if n_samples is None else int(n_samples)
    frac, flagged = BernoulliSampler(p0, seed).mean_estimate(n)
    raw = 2 * frac - 1
    return EstimateReport(raw * scale, exact_val, queries * n, n, mode, seed, budget,
                          extra | {"raw_estimate": raw, "flagged": flagged,
                                   "exact_expectation": (2 * p0 - 1) * scale})


# --- permutation traces -------------------------------------------------------

SWAP_CAPS = {2: 4, 3: 2}


def swap_patterns(q: int) -> tuple[list[int], list[int]]:
    """Zero-based J and K: J = (2k, 3, 2, 5, 4, ..., 1), K swaps neighbours."""
    if q % 2 or q < 2:
        raise ValueError("permutation moments need an even q >= 2")
    if q == 2:
        return [1, 0], [1, 0]
    j = [0] * q
    j[0], j[q - 1] = q - 1, 0
    for t in range(1, q - 1, 2):
        j[t], j[t + 1] = t + 1, t
    kk = [t ^ 1 for t in range(q)]
    return j, kk


def swap_moment(ch: chn.KrausChannel, q: int) -> float:
    """Tr[(F_J kron F_K) E_B^(kron q)] by contracting one copy at a time.

    Copy t carries indices (x_t, y_t; x_J(t), y_K(t)), so the full q-fold
    operator is never built.
    """
    d = ch.d
    cap = SWAP_CAPS.get(d)
    if cap is None or q > cap:
        raise CapError(f"permutation moment cap: d=2 allows q <= 4, d=3 allows q = 2 (got d={d}, q={q})")
    j, kk = swap_patterns(q)
    t4 = chn.choi(ch).reshape(d, d, d, d)
    ops = []
    for t in range(q):
        ops += [t4, [t, q + t, j[t], q + kk[t]]]
    val = np.einsum(*ops, [], optimize="greedy")
    return float(np.real(val))


# --- first moment -------------------------------------------------------------

def first_moment_exact(ch: chn.KrausChannel) -> float:
    return la.trace_norm(chn.reshuffle(chn.choi(ch), ch.d))


def reshuffled_generator(ch: chn.KrausChannel) -> np.ndarray:
    return chn.hermitize(chn.reshuffle(chn.choi(ch), ch.d))


def cos_traces(hp: np.ndarray, L: int) -> np.ndarray:
    w = np.linalg.eigvalsh(hp)
    odd = 2 * np.arange(1, L + 1) - 1
    return np.cos(np.outer(odd, w)).sum(axis=1)


def term_precisions(L: int, eps2: float, d: int) -> np.ndarray:
    odd = 2 * np.arange(1, L + 1) - 1
    return np.pi * odd / (2 * (2 + math.log(2 * L - 1))) * eps2 / (2 * d * d)


def approx_cos_trace(ch: chn.KrausChannel, ell: int, eps_term: float,
                     max_steps: int = 1 << 16) -> tuple[float, int]:
    """Tr cos((2l-1)H') from a DQC1 run with the approximate controlled evolution.

    The evolution uses the reshuffling-circuit helpers with plain swaps.
    The step count starts at ceil(t^2 / eps) and doubles until the certified
    diamond upper bound reaches eps. Returns the trace and the step count.
    """
    d = ch.d
    t = 2 * ell - 1
    n = max(1, math.ceil(t * t / eps_term))
    while True:
        e = enc.approx_U_reshuffled(chn.choi(ch), 1.0, n, n_controls=1, total_time=d * t)
        up = enc.diamond_upper(e.liouville, enc.unitary_liouville(e.target_unitary))
        if up <= eps_term or n >= max_steps:
            break
        n *= 2
    D = 2 * d * d
    rho = np.kron(np.full((2, 2), 0.5), np.eye(D) / D)
    out = e.apply(rho)
    # the 01 control block is sigma U^dag / 2, so Re Tr U = 2 D Re Tr(out_01)
    val = 2 * np.trace(out[:D, D:]).real * D
    return float(val), n


def first_moment_fc(ch: chn.KrausChannel, eps: float = 0.1, delta: float = 0.05,
                    mode: str = "exact", seed: int = 0, approx_levels: int = 0,
                    max_draws: int = 5_000_000) -> EstimateReport:
    """Estimate ||R(E_B)||_1 from the truncated cosine series of |x|.

    2 ||R||_1 = (pi/2)(2 d^2) - sum_l w_l Tr cos((2l-1)H'), truncated at
    L = ceil(2 d^2/(pi eps1) + 1/2), with eps1 = eps2 = eps3 = 2 eps / 3.
    ``approx_levels`` replaces the exact traces for l <= approx_levels
    (at most 3) by DQC1 runs with approximate controlled evolutions.
    """
    _check_mode(mode)
    if eps <= 0:
        raise ValueError("eps must be positive")
    if approx_levels > 3:
        raise CapError("approximate first-moment levels are capped at 3")
    d = ch.d
    e1 = e2 = e3 = 2 * eps / 3
    L = fourier_level(d * d, e1)
    hp = reshuffled_generator(ch)
    traces = cos_traces(hp, L)
    eps_terms = term_precisions(L, e2, d)
    extra = {"L": L, "eps1": e1, "eps2": e2, "eps3": e3,
             "eps_terms": [float(x) for x in eps_terms[: min(L, 5)]]}
    steps = {}
    for ell in range(1, approx_levels + 1):
        val, n = approx_cos_trace(ch, ell, float(eps_terms[ell - 1]))
        extra.setdefault("approx_trace_error", []).append(abs(val - traces[ell - 1]))
        traces[ell - 1] = val
        steps[ell] = n
    if steps:
        extra["approx_steps"] = steps
    weights = np.array([w for _, w in fourier_cosine(L)])
    trunc = 0.5 * (np.pi * d * d - float(weights @ cos_traces(hp, L)))
    extra["truncation_only"] = trunc
    target = first_moment_exact(ch)
    budget = {"eps1": e1, "eps2": e2, "eps3": e3}
    if mode == "exact":
        est = 0.5 * (np.pi * d * d - float(weights @ traces))
        return EstimateReport(est, target, 0, 0, mode, seed, budget, extra)
    rng = np.random.default_rng(seed)
    odd = 2 * np.arange(1, L + 1) - 1
    probs = 8 / (np.pi**2 * odd**2)
    p_levels = np.append(probs, max(0.0, 1 - probs.sum()))
    var_bound = np.pi * e1 * d * d + 2 * np.pi * d * d * (e2 + 2 * d + e1)
    groups = math.ceil(8 * math.log(1 / delta))
    size = math.ceil(var_bound / e3**2)
    n = min(groups * size, max_draws)
    size = n // groups
    n = groups * size
    lv = rng.choice(L + 1, size=n, p=p_levels / p_levels.sum())
    p0 = np.append(0.5 + traces / (4 * d * d), 0.5)
    zero = rng.random(n) < p0[lv]
    x = np.where(lv == L, 0.0, np.where(zero, -np.pi * d * d, np.pi * d * d))
    mom = median_of_means(x, groups)
    est = 0.5 * (np.pi * d * d + mom)
    per_level = np.array([2 * max(1, math.ceil(t * t / e)) for t, e in zip(odd, eps_terms)] + [0])
    queries = int(per_level[lv].sum())
    extra |= {"groups": groups, "group_size": size, "variance_bound": float(var_bound)}
    return EstimateReport(float(est), target, queries, n, mode, seed, budget, extra)


# --- samplizer ----------------------------------------------------------------

def samplizer_steps(eps: float) -> int:
    """Swap steps per evolution for per-query precision eps: ceil((1/eps) log^2(1/eps))."""
    if not 0 < eps < 1:
        raise ValueError("per-query precision must lie in (0, 1)")
    return max(1, math.ceil(math.log(1 / eps) ** 2 / eps))


def state_query_unitary(rho: np.ndarray) -> np.ndarray:
    """Reference query: sin-sandwich of controlled exp(-i rho/2), block sin(rho/2)."""
    u = la.expm(-0.5j * rho)
    return enc.sin_h_encoding(controlled(u), controlled(la.dag(u))).unitary


def _state_query_circuit(d: int) -> Circuit:
    c = Circuit((2, d))
    c.unitary_op(la.HADAMARD, [0])
    c.query("cV_dag", [0, 1])
    c.unitary_op(la.PAULI_Y, [0])
    c.query("cV", [0, 1])
    c.unitary_op(la.HADAMARD, [0])
    return c


def _expand_queries(circuit: Circuit, d: int) -> Circuit:
    """Replace each "U" / "U_dag" query on (s, system) by the sin-sandwich circuit."""
    sand = _state_query_circuit(d)
    out = Circuit(circuit.dims)
    for op in circuit.ops:
        if op.kind == "query" and op.name in ("U", "U_dag"):
            # the sandwich is Hermitian, so U_dag expands identically
            out.extend(sand, list(op.targets))
        else:
            out.ops.append(op)
    return out


@dataclass
class SamplizeReport:
    queries: int
    eps_per_query: float
    n_steps: int
    samples: int
    bracket: tuple
    diamond_upper: float


def samplize(circuit: Circuit, rho: np.ndarray, delta: float, n_steps: int | None = None):
    """Swap-exponentiation stand-in for every state-encoding query of ``circuit``.

    Queries named "U" / "U_dag" act on (s qubit, system). Each becomes the
    sandwich H, c-e^{+i rho/2}, Y, c-e^{-i rho/2}, H whose evolutions are run
    with n(eps) steps, eps = delta / Q, each step consuming one copy of rho.
    Returns (Liouville matrix of the composed channel, report). The bracket
    compares against the circuit instantiated with the exact reference query.
    """
    if not la.is_density(rho):
        raise ValueError("rho must be a density matrix")
    d = rho.shape[0]
    counts = circuit.query_counts()
    Q = counts.get("U", 0) + counts.get("U_dag", 0)
    if Q < 1:
        raise ValueError("circuit has no state-encoding queries")
    eps = delta / Q
    n = samplizer_steps(eps) if n_steps is None else int(n_steps)
    helper = np.kron(la.proj(1, 2), rho)
    dt = 0.5 / n
    fwd = np.linalg.matrix_power(enc.kraus_liouville(enc.dme_kraus(helper, dt, 1, 1)), n)
    bwd = np.linalg.matrix_power(enc.kraus_liouville(enc.dme_kraus(helper, dt, -1, 1)), n)
    expanded = _expand_queries(circuit, d)
    approx = liouville_of(expanded, {"cV": LocalChannel(fwd), "cV_dag": LocalChannel(bwd)})
    w = state_query_unitary(rho)
    ideal_u = circuit.unitary({"U": w, "U_dag": la.dag(w)})
    ideal = enc.unitary_liouville(ideal_u)
    bracket = enc.choi_distance(approx, ideal)
    up = enc.diamond_upper(approx, ideal)
    return approx, SamplizeReport(Q, eps, n, Q * 2 * n, bracket, up)


# --- unital spectrum ----------------------------------------------------------

def unital_spectrum(ch: chn.KrausChannel) -> np.ndarray:
    """Singular values of E_A from the spectrum of the reshuffling-circuit state.

    For unital channels the eigenvalues come in pairs (1 +- sigma_i)/(2 d^2);
    sorting and pairing extremes inward gives sigma_i = d^2 (hi - lo).
    """
    if not chn.is_unital(ch):
        raise ValidationError("unital_spectrum needs a unital channel")
    d = ch.d
    lam = np.sort(np.linalg.eigvalsh(enc.reshuffling_circuit_rho(chn.choi(ch), 1)))
    n = d * d
    sig = d * d * (lam[::-1][:n] - lam[:n])
    return np.sort(np.clip(sig, 0, None))[::-1]
