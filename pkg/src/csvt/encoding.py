"""Block-encoding a channel's Hermitized Liouville matrix from Choi-state copies.

Register layout for the encoded space: a control qubit X, then two
d-dimensional registers Y and Z; E_A acts on Y kron Z. The helper states
rho_+- are built from the Choi state by a controlled swap of Y and Z, and
short joint evolutions with fresh helpers (swap on X, Y; a maximally
entangled projector on Z, which transposes Z) implement
exp(-i t rho_+-^{T_Z}). Alternating the two helpers and conjugating by the
controlled swap approximates exp(-iH) for H the Hermitized generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channels as chn
from . import linalg as la
from .circuit import Circuit, LocalChannel, choi_of, controlled
from .qsp import (BlockEncoding, PhaseSequence, arcsin_poly, qsvt_apply, qsvt_circuit,
                  synthesize_phases)

MAX_D = 4


def cswap(d: int) -> np.ndarray:
    """|0><0| kron I + |1><1| kron F_YZ on X kron Y kron Z."""
    return controlled(la.swap(d))


def make_rho_pm(ch: chn.KrausChannel, sign: int) -> np.ndarray:
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    d = ch.d
    pm = np.array([[1, sign], [sign, 1]], dtype=complex) / 2
    c = cswap(d)
    return c @ np.kron(pm, chn.choi(ch)) @ la.dag(c)


def dme_generator(d_swap: int, d_pt: int) -> np.ndarray:
    """H~ = F_(A,A') kron d_pt |Phi+><Phi+|_(Z,Z'), ordered (A, Z, A', Z')."""
    f = la.swap(d_swap)
    p = d_pt * la.max_entangled_state(d_pt)
    perm = la.permutation_operator((d_swap, d_swap, d_pt, d_pt), (0, 2, 1, 3))
    return perm @ np.kron(f, p) @ la.dag(perm)


def dme_unitary(d_swap: int, d_pt: int, theta: float) -> np.ndarray:
    """exp(-i theta H~) in closed form: H~ = d_pt F kron Pi with Pi a projector."""
    perm = la.permutation_operator((d_swap, d_swap, d_pt, d_pt), (0, 2, 1, 3))
    pi = la.max_entangled_state(d_pt)
    eye_a = np.eye(d_swap * d_swap)
    c, s = math.cos(d_pt * theta), math.sin(d_pt * theta)
    ordered = (np.kron(eye_a, np.eye(d_pt * d_pt) - pi) + c * np.kron(eye_a, pi)
               - 1j * s * np.kron(la.swap(d_swap), pi))
    return perm @ ordered @ la.dag(perm)


def _split_dims(helper_dim: int, d_pt: int) -> int:
    if helper_dim % d_pt:
        raise ValueError("helper dimension is not a multiple of the transposed factor")
    return helper_dim // d_pt


def swap_exp_step(helper: np.ndarray, sigma: np.ndarray, dt: float, sign: int = 1,
                  d_pt: int | None = None) -> np.ndarray:
    """Tr_helper[e^{-i s H~ dt}(helper kron sigma)e^{+i s H~ dt}] for s = sign.

    ``d_pt`` is the dimension of the trailing factor that is transposed;
    it defaults to the Z register of C^2 kron C^d kron C^d.
    """
    D = helper.shape[0]
    if sigma.shape != helper.shape:
        raise ValueError("helper and sigma must live on isomorphic spaces")
    if d_pt is None:
        d_pt = int(round(math.sqrt(D / 2)))
    da = _split_dims(D, d_pt)
    w = dme_unitary(da, d_pt, sign * dt)
    joint = w @ np.kron(helper, sigma) @ la.dag(w)
    return la.partial_trace(joint, (D, D), [1])


def dme_kraus(helper: np.ndarray, dt: float, sign: int, d_pt: int) -> np.ndarray:
    """Kraus operators (stacked) of sigma -> swap_exp_step(helper, sigma, dt, sign)."""
    D = helper.shape[0]
    da = _split_dims(D, d_pt)
    w = dme_unitary(da, d_pt, sign * dt).reshape(D, D, D, D)
    lam, vecs = np.linalg.eigh((helper + la.dag(helper)) / 2)
    keep = lam > 1e-14
    lam, vecs = lam[keep], vecs[:, keep]
    # K_(r,a)[i, j] = sqrt(p_r) sum_b W[a, i, b, j] psi_r[b]
    k = np.einsum("aibj,br->raij", w, vecs) * np.sqrt(lam)[:, None, None, None]
    return k.reshape(-1, D, D)


def kraus_liouville(kraus: np.ndarray) -> np.ndarray:
    kraus = np.asarray(kraus)
    r, D = kraus.shape[0], kraus.shape[1]
    # sum_k K kron conj(K) as one matrix product over the Kraus index
    prod = kraus.transpose(1, 2, 0).reshape(D * D, r) @ kraus.conj().reshape(r, D * D)
    return prod.reshape(D, D, D, D).transpose(0, 2, 1, 3).reshape(D * D, D * D)


def unitary_liouville(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def _as_liouville(ch) -> np.ndarray:
    if isinstance(ch, EncodedChannel):
        return ch.liouville
    if isinstance(ch, LocalChannel):
        return ch.liouville
    if isinstance(ch, chn.KrausChannel):
        return chn.liouville(ch)
    return np.asarray(ch)


def choi_distance(chan_a, chan_b) -> tuple[float, float]:
    """Bracket on half the diamond distance: (T, D*T), T = Choi-state trace distance.

    Inputs are Liouville matrices (or objects carrying one). With J the
    normalized Choi state, ||J_a - J_b||_1 <= ||A - B||_diamond <= D ||J_a - J_b||_1.
    """
    la_, lb = _as_liouville(chan_a), _as_liouville(chan_b)
    if la_.shape != lb.shape:
        raise ValueError(f"channel dimensions differ: {la_.shape} vs {lb.shape}")
    D = int(round(math.sqrt(la_.shape[0])))
    diff = chn.reshuffle(la_ - lb, D) / D
    t = 0.5 * la.trace_norm(diff)
    return t, D * t


def diamond_upper(chan_a, chan_b) -> float:
    """Half of ||Tr_out |J|||_inf for the unnormalized Choi J of the difference.

    A valid upper bound on half the diamond distance that is never larger
    than the D * T end of ``choi_distance``.
    """
    la_, lb = _as_liouville(chan_a), _as_liouville(chan_b)
    if la_.shape != lb.shape:
        raise ValueError(f"channel dimensions differ: {la_.shape} vs {lb.shape}")
    D = int(round(math.sqrt(la_.shape[0])))
    j = chn.reshuffle(la_ - lb, D)
    a = la.psd_sqrt(la.dag(j) @ j) if not la.is_hermitian(j, 1e-12) else la.herm_fn(j, np.abs)
    return 0.5 * la.op_norm(la.partial_trace(a, (D, D), [1]))


@dataclass
class EncodedChannel:
    liouville: np.ndarray = field(repr=False)
    dim: int
    query_count: int
    target_unitary: np.ndarray = field(repr=False)
    distance_bracket: tuple
    n_steps: int = 0
    dt: float = 0.0
    k: float = 0.0
    n_controls: int = 0
    inverse: bool = False

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return chn.apply_liouville(self.liouville, rho)

    def choi(self) -> np.ndarray:
        return chn.reshuffle(self.liouville, self.dim) / self.dim

    def kraus(self) -> list[np.ndarray]:
        w, v = np.linalg.eigh(self.dim * self.choi())
        return [np.sqrt(x) * v[:, i].reshape(self.dim, self.dim) for i, x in enumerate(w) if x > 1e-12]

    def local(self) -> LocalChannel:
        return LocalChannel(self.liouville)


def controlled_power(u: np.ndarray, n_controls: int) -> np.ndarray:
    for _ in range(n_controls):
        u = controlled(u)
    return u


def step_size(d: int, k: float, n_steps: int) -> float:
    """Swap-step time so that n_steps rounds reach exp(-iH).

    One round advances the generator [[0, E_A F], [F E_A^dag, 0]] / d by dt,
    so the total d^k / 2 gives the 1/(2 d^(1-k)) prefactor of H.
    """
    return d**k / (2 * n_steps)


def steps_for_delta(d: int, k: float, delta: float) -> int:
    """Alternative schedule: dt = 2 delta / d^k, repeated d^(2k) / (4 delta) times."""
    return max(1, math.ceil(d ** (2 * k) / (4 * delta)))


def approx_U_EA(ch: chn.KrausChannel, k: float, n_steps: int, n_controls: int = 0,
                inverse: bool = False, unsafe: bool = False,
                with_distance: bool = True, total_time: float | None = None) -> EncodedChannel:
    """Channel approximating exp(-iH) (or its inverse / controlled versions).

    ``total_time`` overrides the evolution length in units of the round
    generator; by default it is d^k / 2, which targets exp(-iH).
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    d = ch.d
    if d > MAX_D:
        raise ValueError(f"d={d} exceeds the block-encoding cap d <= {MAX_D}")
    h = chn.hermitized(ch, k, unsafe=unsafe)
    T = d**k / 2 if total_time is None else total_time
    dt = T / n_steps
    ctrl = np.zeros((2**n_controls, 2**n_controls))
    ctrl[-1, -1] = 1.0
    helpers = {s: np.kron(ctrl, make_rho_pm(ch, s)) for s in (1, -1)}
    # forward round: e^{+i rho_- dt} after e^{-i rho_+ dt}; inverse swaps both signs
    s_plus = -1 if inverse else 1
    s_minus = 1 if inverse else -1
    l_plus = kraus_liouville(dme_kraus(helpers[1], dt, s_plus, d))
    l_minus = kraus_liouville(dme_kraus(helpers[-1], dt, s_minus, d))
    rnd = l_minus @ l_plus
    total = np.linalg.matrix_power(rnd, n_steps)
    conj = unitary_liouville(np.kron(np.eye(2**n_controls), cswap(d)))
    mat = conj @ total @ conj
    u = la.expm(-1j * (h * 2 * T / d**k))
    if inverse:
        u = la.dag(u)
    target = controlled_power(u, n_controls)
    dim = target.shape[0]
    bracket = choi_distance(mat, unitary_liouville(target)) if with_distance else (float("nan"),) * 2
    return EncodedChannel(mat, dim, 2 * n_steps, target, bracket, n_steps, dt, k, n_controls, inverse)


def controlled_variant(ch: chn.KrausChannel, k: float, n_steps: int, inverse: bool = False,
                       **kw) -> EncodedChannel:
    return approx_U_EA(ch, k, n_steps, n_controls=1, inverse=inverse, **kw)


def sin_h_circuit(d: int) -> Circuit:
    """(H kron I) cU (Y kron I) cU^dag (H kron I) on registers (s, X, Y, Z)."""
    c = Circuit((2, 2, d, d))
    c.unitary_op(la.HADAMARD, [0])
    c.query("cU_dag", [0, 1, 2, 3])
    c.unitary_op(la.PAULI_Y, [0])
    c.query("cU", [0, 1, 2, 3])
    c.unitary_op(la.HADAMARD, [0])
    return c


def sin_h_encoding(cu: np.ndarray, cu_dag: np.ndarray) -> BlockEncoding:
    """Block encoding of sin H from controlled e^{-iH} and its inverse.

    The top-left block of the returned unitary is
    (<+| kron I) cU (Y kron I) cU^dag (|+> kron I) = sin H.
    """
    n = cu.shape[0] // 2
    c = Circuit((2, n))
    c.unitary_op(la.HADAMARD, [0])
    c.query("cU_dag", [0, 1])
    c.unitary_op(la.PAULI_Y, [0])
    c.query("cU", [0, 1])
    c.unitary_op(la.HADAMARD, [0])
    u = c.unitary({"cU": cu, "cU_dag": cu_dag})
    return BlockEncoding(u, 1.0, 1, 0.0, n)


def exact_sin_h(ch: chn.KrausChannel, k: float, unsafe: bool = False) -> BlockEncoding:
    u = la.expm(-1j * chn.hermitized(ch, k, unsafe=unsafe))
    return sin_h_encoding(controlled(u), controlled(la.dag(u)))


@dataclass
class ArcsinResult:
    encoding: BlockEncoding
    phases: PhaseSequence
    degree: int
    poly_error: float


def arcsin_correct(be: BlockEncoding, eps_prime: float, phase_ancilla: bool = True) -> ArcsinResult:
    """QSVT with an odd P close to (2/pi) arcsin on [-1/2, 1/2]; the block becomes (2/pi) H."""
    poly = arcsin_poly(eps_prime)
    phases = synthesize_phases(poly, tol=min(1e-9, eps_prime / 100))
    out = qsvt_apply(be, phases, phase_ancilla=phase_ancilla)
    eps = eps_prime + be.epsilon + phases.residual
    out = BlockEncoding(out.unitary, out.alpha, out.num_ancillas, eps, out.system_dim)
    return ArcsinResult(out, phases, poly.degree, poly.info["error"])


def arcsin_encoding_circuit(d: int, phases: PhaseSequence) -> Circuit:
    """Arcsin-corrected encoding as a circuit with symbolic cU / cU_dag queries.

    Registers: (LCU qubit, s, X, Y, Z); the phase-rotation qubit is not
    simulated because it returns to |0> exactly, so ancillas counted by
    the construction are LCU, phase qubit and s.
    """
    return qsvt_circuit(sin_h_circuit(d), [0], phases.phases)


@dataclass
class ArcsinEncodingReport:
    per_query_steps: int
    queries: int
    channel_uses: int
    bracket_vs_exact_circuit: tuple
    upper_vs_exact_circuit: float
    block_error: float
    eps_prime: float


def arcsin_encoding_channel(ch: chn.KrausChannel, k: float, eps_prime: float, n_steps: int) -> ArcsinEncodingReport:
    """Run the arcsin-corrected circuit with approximate controlled queries.

    Compares its Choi state against the same circuit with exact queries and
    measures the exact circuit's block against (2/pi) H.
    """
    d = ch.d
    poly = arcsin_poly(eps_prime)
    phases = synthesize_phases(poly, tol=min(1e-9, eps_prime / 100))
    circ = arcsin_encoding_circuit(d, phases)
    h = chn.hermitized(ch, k)
    u = la.expm(-1j * h)
    exact = {"cU": controlled(u), "cU_dag": controlled(la.dag(u))}
    fwd = controlled_variant(ch, k, n_steps, with_distance=False)
    inv = controlled_variant(ch, k, n_steps, inverse=True, with_distance=False)
    approx = {"cU": fwd.local(), "cU_dag": inv.local()}
    j_exact = choi_of(circ, exact)
    j_approx = choi_of(circ, approx)
    D = circ.dim
    t = 0.5 * la.trace_norm(j_exact - j_approx)
    ideal = circ.unitary(exact)
    n = 2 * d * d
    block = ideal[:n, :n]
    err = la.op_norm(block - 2 / np.pi * h)
    q = sum(circ.query_counts().values())
    j = D * (j_exact - j_approx)
    up = 0.5 * la.op_norm(la.partial_trace(la.herm_fn(j, np.abs), (D, D), [1]))
    return ArcsinEncodingReport(n_steps, q, q * 2 * n_steps, (t, D * t), up, err, eps_prime)


# --- reshuffling-circuit alternative -----------------------------------------

def _reshuffle_blocks(rho: np.ndarray, d: int, sign: int) -> np.ndarray:
    t1 = la.partial_trace(rho, (d, d), [0])
    t2 = la.partial_trace(rho, (d, d), [1])
    r = chn.reshuffle(rho, d)
    eye = np.eye(d)
    top = np.kron(t1, eye)
    bot = np.kron(eye, t2)
    return np.block([[top, sign * r], [sign * la.dag(r), bot]]) / 2


def reshuffling_circuit_rho(rho: np.ndarray, sign: int, via: str = "blocks") -> np.ndarray:
    """State on (control, 1, 4) whose off-diagonal block is (1/2d) R(rho).

    ``via="circuit"`` runs the controlled swaps F_23, F_14, F_34 on
    |+-><+-| kron rho_12 kron |Phi+><Phi+|_34 and traces out 2 and 3.
    """
    n = rho.shape[0]
    d = int(round(math.sqrt(n)))
    if d * d != n:
        raise ValueError("input must be a d^2 x d^2 bipartite matrix")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if via == "blocks":
        blocks = _reshuffle_blocks(rho, d, sign)
        # blocks of |0><0| kron (Tr_2 rho kron I) / 2d ... with the 1/d from Tr_3 of Phi+
        return blocks / d
    pm = np.array([[1, sign], [sign, 1]], dtype=complex) / 2
    dims = (2, d, d, d, d)
    state = np.kron(pm, np.kron(rho, la.max_entangled_state(d)))
    c = Circuit(dims)
    c.unitary_op(controlled(la.swap(d)), [0, 2, 3])
    c.unitary_op(controlled(la.swap(d)), [0, 1, 4])
    c.unitary_op(controlled(la.swap(d)), [0, 3, 4])
    out = c.run(state)
    return la.partial_trace(out, dims, [0, 1, 4])


def reshuffled_step(helper: np.ndarray, sigma: np.ndarray, dt: float, sign: int = 1) -> np.ndarray:
    """Plain swap-based exponentiation step (no partial transpose)."""
    D = helper.shape[0]
    w = dme_unitary(D, 1, sign * dt)
    joint = w @ np.kron(helper, sigma) @ la.dag(w)
    return la.partial_trace(joint, (D, D), [1])


def approx_U_reshuffled(rho: np.ndarray, k: float, n_steps: int, n_controls: int = 0,
                        total_time: float | None = None) -> EncodedChannel:
    """Alternative encoding from the reshuffling-circuit states with plain swaps.

    Approximates exp(-i H_R), H_R = [[0, R(rho)], [R(rho)^dag, 0]] / (2 d^(1-k)).
    One round advances [[0, R], [R^dag, 0]] / d by dt, so ``total_time``
    (default d^k / 2) sets the evolution length.
    """
    n = rho.shape[0]
    d = int(round(math.sqrt(n)))
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    T = d**k / 2 if total_time is None else total_time
    dt = T / n_steps
    ctrl = np.zeros((2**n_controls, 2**n_controls))
    ctrl[-1, -1] = 1.0
    hp = np.kron(ctrl, reshuffling_circuit_rho(rho, 1))
    hm = np.kron(ctrl, reshuffling_circuit_rho(rho, -1))
    lp = kraus_liouville(dme_kraus(hp, dt, 1, 1))
    lm = kraus_liouville(dme_kraus(hm, dt, -1, 1))
    mat = np.linalg.matrix_power(lm @ lp, n_steps)
    u = la.expm(-1j * chn.hermitize(chn.reshuffle(rho, d)) * T / d)
    target = controlled_power(u, n_controls)
    bracket = choi_distance(mat, unitary_liouville(target))
    return EncodedChannel(mat, target.shape[0], 2 * n_steps, target, bracket, n_steps, dt, k,
                          n_controls)
