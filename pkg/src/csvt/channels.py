"""Channel representations: Kraus, Liouville (A-form), Choi (B-form).

The Choi state puts the channel output on the first factor,
``E_B = (E kron id)|Phi+><Phi+|``, and the Liouville matrix is
``E_A = sum_m K_m kron conj(K_m)``, so that ``d * reshuffle(E_B) = E_A``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg as la

CPTP_TOL = 1e-8
UNITAL_TOL = 1e-8
KRAUS_FLOOR = 1e-10


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class KrausChannel:
    d: int
    kraus_ops: tuple = field(repr=False)

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise ValueError("Kraus list is empty")
        for k in ops:
            if k.shape != (self.d, self.d):
                raise ValueError(f"Kraus operator of shape {k.shape}, expected {(self.d, self.d)}")
        object.__setattr__(self, "kraus_ops", ops)
        defect = la.op_norm(sum(la.dag(k) @ k for k in ops) - np.eye(self.d))
        if defect > CPTP_TOL:
            raise ValueError(f"trace preservation violated: ||sum K^dag K - I|| = {defect:.3e}")

    def __call__(self, rho):
        return apply(self, rho)

    @property
    def rank(self) -> int:
        return len(self.kraus_ops)


@dataclass(frozen=True)
class ChannelSpectrum:
    eigenvalues: np.ndarray
    singular_values: np.ndarray

    def check(self, tol: float = CPTP_TOL) -> dict[str, bool]:
        ev = self.eigenvalues
        return {
            "has_unit_eigenvalue": bool(np.min(np.abs(ev - 1)) <= tol),
            "conjugate_closed": multiset_close(ev, np.conj(ev), 1e-7),
            "eigenvalues_in_disk": bool(np.max(np.abs(ev)) <= 1 + tol),
        }


def multiset_close(a, b, tol: float) -> bool:
    """Greedy pairing of two complex multisets within ``tol``."""
    a = list(np.asarray(a).ravel())
    b = list(np.asarray(b).ravel())
    if len(a) != len(b):
        return False
    for x in a:
        dist = [abs(x - y) for y in b]
        j = int(np.argmin(dist))
        if dist[j] > tol:
            return False
        b.pop(j)
    return True


def apply(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (ch.d, ch.d):
        raise ValueError(f"state of shape {rho.shape} for a channel on dimension {ch.d}")
    return sum(k @ rho @ la.dag(k) for k in ch.kraus_ops)


def liouville(ch: KrausChannel) -> np.ndarray:
    return sum(np.kron(k, k.conj()) for k in ch.kraus_ops)


def choi(ch: KrausChannel) -> np.ndarray:
    """Normalized Choi state with the channel acting on the first factor."""
    d = ch.d
    out = np.zeros((d * d, d * d), dtype=complex)
    for k in ch.kraus_ops:
        # (K kron I)|Phi+> has amplitude K[i, j] on |i, j>
        v = k.reshape(-1) / np.sqrt(d)
        out += np.outer(v, v.conj())
    return out


def reshuffle(m: np.ndarray, d: int) -> np.ndarray:
    """|i><j| kron |k><l|  ->  |i><k| kron |j><l| on C^d kron C^d."""
    m = np.asarray(m)
    if m.shape != (d * d, d * d):
        raise ValueError(f"reshuffle expects a {d*d}x{d*d} matrix, got {m.shape}")
    return m.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def liouville_from_choi(state: np.ndarray, d: int) -> np.ndarray:
    return d * reshuffle(state, d)


def choi_from_liouville(mat: np.ndarray, d: int) -> np.ndarray:
    return reshuffle(mat, d) / d


def apply_liouville(mat: np.ndarray, rho: np.ndarray) -> np.ndarray:
    return (mat @ rho.reshape(-1)).reshape(rho.shape)


def kraus_from_choi(state: np.ndarray, d: int) -> KrausChannel:
    """Recover Kraus operators from a Choi state, dropping eigenvalues <= 1e-10.

    The truncation is lossy below the floor, so the surviving set is
    renormalized to restore trace preservation.
    """
    w, v = np.linalg.eigh(d * (state + la.dag(state)) / 2)
    ops = [np.sqrt(lam) * v[:, i].reshape(d, d) for i, lam in enumerate(w) if lam > KRAUS_FLOOR]
    s = sum(la.dag(k) @ k for k in ops)
    fix = la.herm_fn(s, lambda x: 1 / np.sqrt(x))
    return KrausChannel(d, tuple(k @ fix for k in ops))


def spectrum(ch: KrausChannel) -> ChannelSpectrum:
    mat = liouville(ch)
    ev = np.linalg.eigvals(mat)
    sv = np.linalg.svd(mat, compute_uv=False)
    return ChannelSpectrum(ev, sv)


def moment_exact(ch: KrausChannel, q: float) -> float:
    """S_q = d^-q sum_i sigma_i^q over the d^2 singular values of E_A."""
    if q <= 0:
        raise ValueError("moment order must be positive")
    sv = np.linalg.svd(liouville(ch), compute_uv=False)
    return float(np.sum(sv**q) / ch.d**q)


def is_unital(ch: KrausChannel, tol: float = UNITAL_TOL) -> bool:
    mixed = np.eye(ch.d) / ch.d
    return la.trace_norm(apply(ch, mixed) - mixed) <= tol


def hermitized(ch: KrausChannel, k: float, unsafe: bool = False) -> np.ndarray:
    """H = [[0, E_A], [E_A^dag, 0]] / (2 d^(1-k)), ordered control-qubit first."""
    kmax = 1.0 if is_unital(ch) else 0.5
    if not unsafe and not (0.0 <= k <= kmax):
        kind = "unital" if kmax == 1.0 else "non-unital"
        raise ValueError(f"k={k} outside [0, {kmax}] for a {kind} channel")
    return hermitize(liouville(ch)) / (2 * ch.d ** (1 - k))


def hermitize(a: np.ndarray) -> np.ndarray:
    n, m = a.shape
    out = np.zeros((n + m, n + m), dtype=complex)
    out[:n, n:] = a
    out[n:, :n] = la.dag(a)
    return out


@dataclass
class LemmaReport:
    values: dict
    passed: dict

    @property
    def ok(self) -> bool:
        return all(self.passed.values())

    def failures(self) -> list[str]:
        return [k for k, v in self.passed.items() if not v]


def lemma_suite(ch: KrausChannel, tol: float = CPTP_TOL) -> LemmaReport:
    d = ch.d
    state = choi(ch)
    sp = spectrum(ch)
    sv = sp.singular_values
    unital = is_unital(ch)
    purity = float(np.trace(state @ state).real)
    s2 = float(np.sum(sv**2) / d**2)
    top = float(sv[0])
    nuc = float(sv.sum())
    rnorm = la.op_norm(reshuffle(state, d))
    values = {
        "min_abs_eig_minus_one": float(np.min(np.abs(sp.eigenvalues - 1))),
        "max_abs_eigenvalue": float(np.max(np.abs(sp.eigenvalues))),
        "S2": s2,
        "choi_purity": purity,
        "opnorm_EA": top,
        "trace_norm_EA": nuc,
        "opnorm_reshuffled_choi": rnorm,
        "unital": unital,
    }
    passed = dict(sp.check(tol))
    passed["S2_equals_purity"] = abs(s2 - purity) <= tol
    passed["opnorm_bounds"] = 1 - tol <= top <= np.sqrt(d) + tol
    passed["unital_saturation"] = (abs(top - 1) <= tol) == unital
    passed["trace_norm_bound"] = nuc <= d * d + tol
    passed["reshuffled_choi_opnorm"] = rnorm <= 1 + tol
    return LemmaReport(values, passed)


# --- named and random channels ------------------------------------------------

def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(d, (np.eye(d),))


def unitary_channel(u: np.ndarray) -> KrausChannel:
    return KrausChannel(u.shape[0], (u,))


def completely_depolarizing(d: int) -> KrausChannel:
    ops = []
    for i in range(d):
        for j in range(d):
            k = np.zeros((d, d), dtype=complex)
            k[i, j] = 1 / np.sqrt(d)
            ops.append(k)
    return KrausChannel(d, tuple(ops))


def trace_and_replace(d: int, index: int = 0) -> KrausChannel:
    """rho -> Tr(rho) |index><index|."""
    ops = []
    for j in range(d):
        k = np.zeros((d, d), dtype=complex)
        k[index, j] = 1.0
        ops.append(k)
    return KrausChannel(d, tuple(ops))


def depolarizing(a: float) -> KrausChannel:
    """Qubit D_a(rho) = a I/2 + (1 - a) rho."""
    if not 0 <= a <= 1:
        raise ValueError("depolarizing parameter must lie in [0, 1]")
    ops = [np.sqrt(1 - 3 * a / 4) * la.PAULI_I]
    ops += [np.sqrt(a / 4) * p for p in (la.PAULI_X, la.PAULI_Y, la.PAULI_Z)]
    return KrausChannel(2, tuple(ops))


def measure_prepare(d: int, seed=None) -> KrausChannel:
    """Measure in the computational basis and prepare random pure states.

    Entanglement-breaking by construction.
    """
    rng = _rng(seed)
    ops = []
    for j in range(d):
        psi = la.random_unitary(d, rng)[:, 0]
        ops.append(np.outer(psi, la.ket(j, d)))
    return KrausChannel(d, tuple(ops))


def random_channel(d: int, env_dim: int, seed=None) -> KrausChannel:
    """Kraus operators cut from a Haar isometry C^d -> C^(env_dim * d)."""
    if env_dim < 1:
        raise ValueError("env_dim must be at least 1")
    rng = _rng(seed)
    n = env_dim * d
    z = (rng.normal(size=(n, d)) + 1j * rng.normal(size=(n, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    iso = q * (np.diag(r) / np.abs(np.diag(r)))
    return KrausChannel(d, tuple(iso[m * d:(m + 1) * d, :] for m in range(env_dim)))


def random_unital_channel(d: int, seed=None, n_unitaries: int | None = None) -> KrausChannel:
    """Uniform mixture of 2 d^2 Haar unitaries (unital by construction)."""
    rng = _rng(seed)
    n = 2 * d * d if n_unitaries is None else n_unitaries
    return KrausChannel(d, tuple(la.random_unitary(d, rng) / np.sqrt(n) for _ in range(n)))


def compose(*channels: KrausChannel) -> KrausChannel:
    """compose(a, b)(rho) = a(b(rho))."""
    ops = [np.eye(channels[0].d)]
    for ch in reversed(channels):
        ops = [k @ o for k in ch.kraus_ops for o in ops]
    return KrausChannel(channels[0].d, tuple(ops))


def tensor(a: KrausChannel, b: KrausChannel) -> KrausChannel:
    return KrausChannel(a.d * b.d, tuple(np.kron(x, y) for x in a.kraus_ops for y in b.kraus_ops))
