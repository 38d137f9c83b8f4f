"""Numerical checks for the depolarizing channel pair behind the query lower bound.

E_a(rho) = D_a(Tr_E rho) kron |0..0><0..0|, where Tr_E discards the last
n - 1 qubits, D_a is the qubit depolarizing channel on the kept qubit and
the appended pure state lives on n - 1 qubits, so E_a maps n qubits to n
qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channels as chn
from . import encoding as enc
from . import linalg as la
from .errors import CapError

MAX_QUBITS = 3
COMMUTATION_TOL = 1e-9


def pair_channel(n: int, a: float) -> chn.KrausChannel:
    """Kraus operators P_j kron |0..0><e| for each depolarizing Kraus P_j and env basis e."""
    if n < 1:
        raise ValueError("need at least one qubit")
    if n > MAX_QUBITS:
        raise CapError(f"n={n} exceeds the discrimination cap n <= {MAX_QUBITS}")
    dep = chn.depolarizing(a)
    m = 2 ** (n - 1)
    ops = []
    for k in dep.kraus_ops:
        for e in range(m):
            ops.append(np.kron(k, np.outer(la.ket(0, m), la.ket(e, m))))
    return chn.KrausChannel(2**n, tuple(ops))


def closed_form_choi(n: int, a: float) -> np.ndarray:
    """(a I/4 + (1-a) Phi_2) kron (|0..0><0..0| kron I/2^(n-1)), regrouped to (out, in)."""
    m = 2 ** (n - 1)
    qubit = a * np.eye(4) / 4 + (1 - a) * la.max_entangled_state(2)
    env = np.kron(la.proj(0, m), np.eye(m) / m)
    # factor order of the product: (out_q, in_q, out_e, in_e) -> (out_q, out_e, in_q, in_e)
    perm = la.permutation_operator((2, 2, m, m), (0, 2, 1, 3))
    return perm @ np.kron(qubit, env) @ la.dag(perm)


def fidelity_closed_form(p: float, q: float) -> float:
    return (math.sqrt(1 - 0.75 * p) * math.sqrt(1 - 0.75 * q) + 3 * math.sqrt(p * q) / 4) ** 2


@dataclass
class DiscriminationInstance:
    n: int
    p: float
    q: float
    channels: tuple = field(repr=False)
    derived: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return 2**self.n


def build_instance(n: int, p: float, q: float) -> DiscriminationInstance:
    for name, v in (("p", p), ("q", q)):
        if not 0 <= v <= 1:
            raise ValueError(f"{name}={v} outside [0, 1]")
    e1, e2 = pair_channel(n, p), pair_channel(n, q)
    d = 2**n
    j1, j2 = chn.choi(e1), chn.choi(e2)
    diff = j1 - j2
    rnorm = la.op_norm(chn.reshuffle(diff, d))
    derived = {
        "delta_trace": la.trace_norm(diff),
        "reshuffled_opnorm": rnorm,
        "d_reshuffled_opnorm": d * rnorm,
        "fidelity": la.fidelity(j1, j2),
        "t_star": math.pi / (2 * d * rnorm) if rnorm > 0 else math.inf,
        "choi_closed_form_error": max(la.op_norm(j1 - closed_form_choi(n, p)),
                                      la.op_norm(j2 - closed_form_choi(n, q))),
    }
    return DiscriminationInstance(n, p, q, (e1, e2), derived)


def closed_form_report(inst: DiscriminationInstance) -> dict:
    """Measured minus closed-form value for each identity."""
    d, dp = inst.d, abs(inst.p - inst.q)
    return {
        "delta_trace": abs(inst.derived["delta_trace"] - 1.5 * dp),
        "d_reshuffled_opnorm": abs(inst.derived["d_reshuffled_opnorm"] - math.sqrt(d / 2) * dp),
        "fidelity": abs(inst.derived["fidelity"] - fidelity_closed_form(inst.p, inst.q)),
        "choi": inst.derived["choi_closed_form_error"],
    }


def generators(inst: DiscriminationInstance) -> tuple[np.ndarray, np.ndarray]:
    """Unscaled Hermitized Liouville matrices [[0, E_A], [E_A^dag, 0]]."""
    return tuple(chn.hermitize(chn.liouville(e)) for e in inst.channels)


def verify_commutation(inst: DiscriminationInstance, tol: float = COMMUTATION_TOL) -> dict:
    a1, a2 = (chn.liouville(e) for e in inst.channels)
    h1, h2 = generators(inst)
    comm = la.op_norm(h1 @ h2 - h2 @ h1)
    left = la.op_norm(a1 @ la.dag(a2) - a2 @ la.dag(a1))
    right = la.op_norm(la.dag(a1) @ a2 - la.dag(a2) @ a1)
    return {"commutator_norm": comm, "left_identity": left, "right_identity": right,
            "ok": max(comm, left, right) <= tol}


def commutator_norm(e1: chn.KrausChannel, e2: chn.KrausChannel) -> float:
    h1 = chn.hermitize(chn.liouville(e1))
    h2 = chn.hermitize(chn.liouville(e2))
    return la.op_norm(h1 @ h2 - h2 @ h1)


def smallest_arc(phases) -> float:
    """Length of the smallest arc of the unit circle containing all phases."""
    ph = np.sort(np.mod(np.asarray(phases, dtype=float), 2 * np.pi))
    if ph.size <= 1:
        return 0.0
    gaps = np.diff(np.append(ph, ph[0] + 2 * np.pi))
    return float(2 * np.pi - gaps.max())


def eigenphase_arc(inst: DiscriminationInstance, t: float) -> tuple[float, float]:
    """(arc of U_1(t)^dag U_2(t), predicted 2 d ||R(Delta E_B)||_inf t)."""
    predicted = 2 * inst.derived["d_reshuffled_opnorm"] * t
    if predicted >= 2 * np.pi:
        raise ValueError("t too large: predicted arc wraps around the circle")
    h1, h2 = generators(inst)
    u = la.dag(la.expm(-1j * t * h1)) @ la.expm(-1j * t * h2)
    return smallest_arc(np.angle(np.linalg.eigvals(u))), predicted


def lower_bound(d: int, t: float, delta: float) -> float:
    """(16 / (81 pi^2)) (sqrt(d) t)^2 / delta."""
    return 16 / (81 * np.pi**2) * d * t * t / delta


def tomography_baseline(d: int, eps: float) -> float:
    """Order-of-magnitude d^6 / eps^2 sample count (constant set to 1)."""
    return d**6 / eps**2


def covariance_unitary(ch: chn.KrausChannel, pauli: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve E(P rho P^dag) = V E(rho) V^dag for V; returns (V, max residual on a basis).

    The Liouville matrix of V is L_E L_P L_E^+ restricted to the range of E;
    its reshuffle is rank one, vec(V) vec(V)^dag, so V is read off the leading
    singular vector and projected to the nearest unitary.
    """
    d = ch.d
    le = chn.liouville(ch)
    lp = np.kron(pauli, pauli.conj())
    m = le @ lp @ np.linalg.pinv(le, rcond=1e-10)
    u, s, _ = la.svd(chn.reshuffle(m, d))
    v = u[:, 0].reshape(d, d)
    w, _, vh = np.linalg.svd(v)
    v = w @ vh
    res = 0.0
    for i in range(d):
        for j in range(d):
            e = np.outer(la.ket(i, d), la.ket(j, d))
            lhs = chn.apply(ch, pauli @ e @ la.dag(pauli))
            rhs = v @ chn.apply(ch, e) @ la.dag(v)
            res = max(res, float(np.max(np.abs(lhs - rhs))))
    return v, res


def measured_upper_queries(ch: chn.KrausChannel, t: float, delta: float, max_steps: int = 1 << 14) -> int:
    """Fewest channel uses for which the swap-exponentiation channel is delta-close.

    Closeness to U(t) = exp(-i t [[0, E_A], [E_A^dag, 0]]) is certified by
    the computable upper bound on the diamond distance (twice diamond_upper).
    Returns -1 when the step cap is reached.
    """
    d = ch.d
    target = enc.unitary_liouville(la.expm(-1j * t * chn.hermitize(chn.liouville(ch))))

    def ok(n):
        e = enc.approx_U_EA(ch, 0.0, n, with_distance=False, unsafe=True, total_time=d * t)
        return 2 * enc.diamond_upper(e.liouville, target) <= delta

    n = 1
    while not ok(n):
        n *= 2
        if n > max_steps:
            return -1
    lo, hi = n // 2, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 2 * hi


def bound_table(inst: DiscriminationInstance, delta_grid, t_grid, measure: bool = True) -> list[dict]:
    rows = []
    for delta in delta_grid:
        for t in t_grid:
            up = measured_upper_queries(inst.channels[0], t, delta) if measure else -1
            rows.append({
                "n": inst.n, "p": inst.p, "q": inst.q, "delta": delta, "t": t,
                "lower_bound": lower_bound(inst.d, t, delta),
                "measured_upper_queries": up,
                "tomo_baseline": tomography_baseline(inst.d, delta),
            })
    return rows
