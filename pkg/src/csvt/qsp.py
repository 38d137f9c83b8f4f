"""Chebyshev polynomials, quantum signal processing and QSVT.

Phase convention ("Wx"): the scalar signal is the rotation
W(x) = [[x, i sqrt(1-x^2)], [i sqrt(1-x^2), x]] and a phase list
(phi_0, ..., phi_n) realizes

    U(x) = e^{i phi_0 Z} W(x) e^{i phi_1 Z} ... W(x) e^{i phi_n Z},
    P(x) = <0|U(x)|0>.

All-zero phases give P = T_n. Real targets are realized as Re P, which on
the matrix level costs one extra ancilla for the linear combination of the
sequences with phases +phi and -phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy.optimize import least_squares

from . import linalg as la
from .circuit import Circuit, controlled

SUP_SLACK = 1e-9
GRID_POINTS = 10_000
DEGREE_CAP = 16384
SYNTH_DEGREE_CAP = 64
CONVENTION = "Wx"


@dataclass(frozen=True)
class ChebyshevPoly:
    coeffs: np.ndarray
    parity: str  # "even" | "odd" | "none"
    sup_bound: float
    info: dict = field(default_factory=dict, compare=False)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.coeffs)
        return int(nz[-1]) if nz.size else 0

    def __call__(self, x):
        return cheb.chebval(x, self.coeffs)


def _grid(degree: int) -> np.ndarray:
    n = max(4 * degree, 64)
    nodes = np.cos(np.pi * np.arange(n + 1) / n)
    return np.concatenate([np.linspace(-1, 1, GRID_POINTS), nodes])


def certify_sup(coeffs) -> float:
    coeffs = np.asarray(coeffs, dtype=float)
    return float(np.max(np.abs(cheb.chebval(_grid(len(coeffs)), coeffs)))) + SUP_SLACK


def _parity_of(coeffs, tol=0.0) -> str:
    c = np.asarray(coeffs)
    even = np.all(np.abs(c[1::2]) <= tol)
    odd = np.all(np.abs(c[0::2]) <= tol)
    if even and not odd:
        return "even"
    if odd and not even:
        return "odd"
    return "even" if even else "none"


def make_poly(coeffs, parity: str | None = None, info: dict | None = None) -> ChebyshevPoly:
    c = np.array(coeffs, dtype=float)
    if parity is None:
        parity = _parity_of(c)
    if parity == "even":
        c[1::2] = 0.0
    elif parity == "odd":
        c[0::2] = 0.0
    return ChebyshevPoly(c, parity, certify_sup(c), dict(info or {}))


def _chebyshev_coeffs(f, degree: int, nodes: int | None = None):
    """Chebyshev-Gauss quadrature for c_0..c_degree; also reports f's parity."""
    m = max(4 * (degree + 1), 8) if nodes is None else nodes
    theta = (np.arange(m) + 0.5) * np.pi / m
    x = np.cos(theta)
    fx = np.asarray(f(x), dtype=float)
    j = np.arange(degree + 1)
    c = (2.0 / m) * np.cos(np.outer(j, theta)) @ fx
    c[0] /= 2
    # nodes come in +-x pairs, so parity of f is read off directly
    fr = fx[::-1]
    scale = max(1.0, float(np.max(np.abs(fx))))
    if np.max(np.abs(fx - fr)) <= 1e-13 * scale:
        parity = "even"
    elif np.max(np.abs(fx + fr)) <= 1e-13 * scale:
        parity = "odd"
    else:
        parity = "none"
    return c, parity


def cheb_fit(f, degree: int, nodes: int | None = None) -> ChebyshevPoly:
    """Degree-``degree`` truncated Chebyshev expansion of f on [-1, 1]."""
    if degree < 0:
        raise ValueError("degree must be non-negative")
    c, parity = _chebyshev_coeffs(f, degree, nodes)
    return make_poly(c, parity)


def averaged_poly(f, d: int) -> ChebyshevPoly:
    """(1/d) sum_{k=d}^{2d-1} of the degree-k truncations (de la Vallee Poussin mean)."""
    if d < 1:
        raise ValueError("d must be at least 1")
    top = 2 * d - 1
    c, parity = _chebyshev_coeffs(f, top)
    j = np.arange(top + 1)
    w = np.where(j <= d, 1.0, (2 * d - j) / d)
    return make_poly(c * w, parity)


def grid_error(poly: ChebyshevPoly, f, lo: float = -1.0, hi: float = 1.0) -> float:
    x = np.linspace(lo, hi, GRID_POINTS)
    return float(np.max(np.abs(poly(x) - f(x))))


def power_exponents(q: float) -> tuple[int, float]:
    """(r, alpha) with r + alpha = q - 2 and r odd, so the target is even.

    When q - 2 is an even integer no alpha in the open interval works; the
    target is then the polynomial x^(q-2) itself and alpha = 1 is returned.
    """
    s = q - 2
    r = 2 * math.floor((s + 1) / 2) + 1 if s > 0 else 1
    if r - s >= 1:
        r -= 2
    if r < 1:
        r = 1
    return r, s - r


def power_target(q: float, eps: float, cap: int = DEGREE_CAP) -> ChebyshevPoly:
    """Even polynomial within eps of x -> |x|^(q-2) / 2 on [-1, 1]."""
    if q <= 2:
        raise ValueError("power target needs q > 2")
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    s = q - 2
    r, alpha = power_exponents(q)

    def f(x):
        return 0.5 * np.abs(x) ** s

    info = {"q": q, "r": r, "alpha": alpha, "eps": eps}
    if abs(s - round(s)) < 1e-12 and round(s) % 2 == 0:
        p = cheb_fit(f, int(round(s)))
        err = grid_error(p, f)
        return make_poly(p.coeffs, "even", info | {"error": err, "construction": "exact"})

    def attempt(m):
        p = averaged_poly(f, m)
        return p, grid_error(p, f) + SUP_SLACK

    m = 1
    p, err = attempt(m)
    while err > eps:
        if 2 * (2 * m) - 1 > cap:
            raise ValueError(f"degree cap {cap} reached before eps={eps} (error {err:.3e})")
        m *= 2
        p, err = attempt(m)
    lo, hi = m // 2, m
    best = (p, err, m)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        pm, em = attempt(mid)
        if em <= eps:
            hi, best = mid, (pm, em, mid)
        else:
            lo = mid
    p, err, m = best
    if p.sup_bound > 1:
        raise ValueError("power polynomial exceeds 1 in sup norm")
    return make_poly(p.coeffs, "even", info | {"error": err, "m": m, "construction": "averaged"})


def arcsin_taylor_coeff(j: int) -> float:
    """Coefficient of x^(2j+1) in the Maclaurin series of arcsin."""
    return math.comb(2 * j, j) / (4**j * (2 * j + 1))


def arcsin_poly(eps_prime: float, max_terms: int = 64) -> ChebyshevPoly:
    """Odd P with |P| <= 1 on [-1, 1] and |P - (2/pi) arcsin| <= eps' on [-1/2, 1/2].

    Uses the truncated Maclaurin series scaled by 2/pi. All coefficients are
    positive, so |P(x)| <= P(1) < (2/pi) arcsin(1) = 1 everywhere on [-1, 1],
    and the tail on [-1/2, 1/2] decays like 4^-j.
    """
    def f(x):
        return 2 / np.pi * np.arcsin(np.clip(x, -1, 1))

    for terms in range(1, max_terms + 1):
        mono = np.zeros(2 * terms)
        for j in range(terms):
            mono[2 * j + 1] = 2 / np.pi * arcsin_taylor_coeff(j)
        c = cheb.poly2cheb(mono)
        p = make_poly(c, "odd")
        err = grid_error(p, f, -0.5, 0.5)
        if err <= eps_prime:
            return make_poly(c, "odd", {"eps_prime": eps_prime, "error": err, "terms": terms})
    raise ValueError(f"arcsin polynomial did not reach eps'={eps_prime}")


def fourier_cosine(L: int) -> list[tuple[int, float]]:
    """Weights of |x| = pi/2 - sum_l 4/(pi (2l-1)^2) cos((2l-1) x) on [-1, 1]."""
    if L < 1:
        raise ValueError("L must be at least 1")
    return [(l, 4 / (np.pi * (2 * l - 1) ** 2)) for l in range(1, L + 1)]


def fourier_partial(x, L: int):
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, np.pi / 2)
    for l, w in fourier_cosine(L):
        out = out - w * np.cos((2 * l - 1) * x)
    return out


def fourier_level(dim_sq: float, eps1: float) -> int:
    """Smallest L of the form ceil(2 dim_sq / (pi eps1) + 1/2)."""
    return math.ceil(2 * dim_sq / (np.pi * eps1) + 0.5)


def fourier_tail(dim_sq: float, L: int) -> float:
    return 4 * dim_sq / (np.pi * (2 * L - 1))


# --- quantum signal processing ------------------------------------------------

@dataclass(frozen=True)
class PhaseSequence:
    phases: np.ndarray
    convention: str = CONVENTION
    residual: float = 0.0

    @property
    def degree(self) -> int:
        return len(self.phases) - 1

    def response(self, x) -> np.ndarray:
        return qsp_response(self.phases, x)

    def realized(self, x) -> np.ndarray:
        return self.response(x).real


def qsp_response(phases, x) -> np.ndarray:
    """<0|U(x)|0> for the Wx convention, vectorized over x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s = np.sqrt(np.clip(1 - x**2, 0, None))
    w = np.empty(x.shape + (2, 2), dtype=complex)
    w[..., 0, 0] = x
    w[..., 1, 1] = x
    w[..., 0, 1] = 1j * s
    w[..., 1, 0] = 1j * s
    phases = np.asarray(phases, dtype=float)
    # track the first row of U only
    row = np.zeros(x.shape + (2,), dtype=complex)
    row[..., 0] = np.exp(1j * phases[0])
    for phi in phases[1:]:
        row = np.einsum("...i,...ij->...j", row, w)
        row[..., 0] *= np.exp(1j * phi)
        row[..., 1] *= np.exp(-1j * phi)
    return row[..., 0]


def _expand_symmetric(half, n):
    full = np.empty(n + 1)
    full[: len(half)] = half
    full[n + 1 - len(half):] = half[::-1]
    return full


def synthesize_phases(p: ChebyshevPoly, tol: float = 1e-8, max_restarts: int = 8,
                      seed: int = 0) -> PhaseSequence:
    """Symmetric phases with Re P_phi = p, fitted by least squares on Chebyshev nodes."""
    if p.parity not in ("even", "odd"):
        raise ValueError("phase synthesis needs a definite-parity polynomial")
    if p.sup_bound > 1 + SUP_SLACK:
        raise ValueError("phase synthesis needs sup|p| <= 1")
    n = max(p.degree, 0)
    if p.parity == "odd" and n % 2 == 0:
        n += 1
    if p.parity == "even" and n % 2 == 1:
        n += 1
    if n > SYNTH_DEGREE_CAP:
        raise ValueError(f"degree {n} exceeds the synthesis cap {SYNTH_DEGREE_CAP}")
    half_len = (n + 2) // 2
    dn = half_len
    nodes = np.cos((2 * np.arange(1, dn + 1) - 1) * np.pi / (4 * dn))
    target = p(nodes)
    check = np.linspace(-1, 1, 1001)
    want = p(check)

    def resid(h):
        return qsp_response(_expand_symmetric(h, n), nodes).real - target

    rng = np.random.default_rng(seed)
    starts = [np.r_[np.pi / 4, np.zeros(half_len - 1)], np.zeros(half_len)]
    best = None
    for attempt in range(max_restarts):
        x0 = starts[attempt] if attempt < len(starts) else starts[0] + 0.1 * rng.normal(size=half_len)
        sol = least_squares(resid, x0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
        full = _expand_symmetric(sol.x, n)
        err = float(np.max(np.abs(qsp_response(full, check).real - want)))
        if best is None or err < best[1]:
            best = (full, err)
        if err <= tol:
            break
    full, err = best
    if err > tol:
        raise RuntimeError(f"phase synthesis stalled at grid error {err:.3e} > tol {tol:.1e}")
    return PhaseSequence(full, CONVENTION, err)


# --- block encodings and QSVT ------------------------------------------------

@dataclass(frozen=True)
class BlockEncoding:
    """Unitary whose |0..0> ancilla corner equals A / alpha (ancillas lead)."""

    unitary: np.ndarray = field(repr=False)
    alpha: float
    num_ancillas: int
    epsilon: float
    system_dim: int

    def __post_init__(self):
        if self.unitary.shape[0] != self.system_dim * 2**self.num_ancillas:
            raise ValueError("unitary dimension does not match ancillas and system")

    @property
    def block_projector(self) -> str:
        return f"|0^{self.num_ancillas}> on the leading qubits"

    def block(self) -> np.ndarray:
        n = self.system_dim
        return self.alpha * self.unitary[:n, :n]

    def error(self, a: np.ndarray) -> float:
        return la.op_norm(a - self.block())


def reflection_phases(phases) -> np.ndarray:
    """Convert Wx phases to phases about the block projector with reflection signals."""
    ph = np.asarray(phases, dtype=float).copy()
    n = len(ph) - 1
    if n == 0:
        return ph
    ph[1:-1] -= np.pi / 2
    ph[0] -= np.pi / 4
    ph[-1] -= np.pi / 4
    return ph


def qsvt_circuit(w: Circuit, anc_regs, phases, phase_ancilla: bool = False) -> Circuit:
    """QSVT sequence realizing Re P_phi on the block of ``w``.

    Layout: register 0 is the LCU qubit combining the +phi and -phi
    sequences; with ``phase_ancilla`` register 1 is the qubit that carries
    the projector-controlled rotations; ``w``'s registers follow. The block
    projector is |0> on ``anc_regs`` of ``w``.
    """
    phases = np.asarray(phases, dtype=float)
    n = len(phases) - 1
    plus = reflection_phases(phases)
    minus = reflection_phases(-phases)
    lead = 2 if phase_ancilla else 1
    dims = (2,) * lead + w.dims
    mapping = [i + lead for i in range(len(w.dims))]
    anc = [mapping[r] for r in anc_regs]
    anc_dim = int(np.prod([dims[r] for r in anc]))
    is_block = np.zeros(anc_dim)
    is_block[0] = 1.0
    refl = 2 * is_block - 1  # eigenvalues of 2 Pi - I on the ancilla registers

    def phase_op(c: Circuit, a, b):
        if not phase_ancilla:
            diag = np.concatenate([np.exp(1j * a * refl), np.exp(1j * b * refl)])
            c.unitary_op(np.diag(diag), [0] + anc)
            return
        # CNOT_Pi, z-rotation on the phase qubit (selected by the LCU qubit), CNOT_Pi
        flip = np.zeros((2 * anc_dim, 2 * anc_dim))
        for i in range(anc_dim):
            if is_block[i]:
                flip[i, anc_dim + i] = flip[anc_dim + i, i] = 1
            else:
                flip[i, i] = flip[anc_dim + i, anc_dim + i] = 1
        rz = np.diag(np.exp(1j * np.array([-a, a, -b, b])))
        c.unitary_op(flip, [1] + anc)
        c.unitary_op(rz, [0, 1])
        c.unitary_op(flip, [1] + anc)

    w_dag = w.inverse()
    c = Circuit(dims)
    c.unitary_op(la.HADAMARD, [0])
    # rightmost factor first: e^{i phi_n}, W, e^{i phi_(n-1)}, W^dag, ...
    phase_op(c, plus[n], minus[n])
    for j in range(n, 0, -1):
        c.extend(w if (n - j) % 2 == 0 else w_dag, mapping)
        phase_op(c, plus[j - 1], minus[j - 1])
    # reflection signals differ from W(x) by a factor i per query
    c.unitary_op(((1j) ** n) * la.HADAMARD, [0])
    return c


def qsvt_apply(be: BlockEncoding, phases: PhaseSequence, phase_ancilla: bool = False) -> BlockEncoding:
    """Block of the result is Re P_phi applied to the (Hermitian) encoded block."""
    if abs(be.alpha - 1) > 1e-12:
        raise ValueError("qsvt_apply expects alpha = 1")
    anc_dim = be.unitary.shape[0] // be.system_dim
    w = Circuit((anc_dim, be.system_dim)).query("W", [0, 1])
    c = qsvt_circuit(w, [0], phases.phases, phase_ancilla)
    u = c.unitary({"W": be.unitary, "W_dag": la.dag(be.unitary)})
    extra = 2 if phase_ancilla else 1
    return BlockEncoding(u, 1.0, be.num_ancillas + extra, be.epsilon, be.system_dim)


def exact_poly_be(a: np.ndarray, p: ChebyshevPoly) -> BlockEncoding:
    """Unitary dilation [[P(a), S], [S, -P(a)]] with S = sqrt(1 - P(a)^2)."""
    if p.sup_bound > 1 + SUP_SLACK:
        raise ValueError("polynomial sup bound exceeds 1")
    if not la.is_hermitian(a) or la.op_norm(a) > 1 + 1e-12:
        raise ValueError("exact_poly_be needs a Hermitian contraction")
    w, v = np.linalg.eigh((a + la.dag(a)) / 2)
    pw = np.clip(p(w), -1, 1)
    blk = (v * pw) @ la.dag(v)
    comp = (v * np.sqrt(1 - pw**2)) @ la.dag(v)
    u = np.block([[blk, comp], [comp, -blk]])
    return BlockEncoding(u, 1.0, 1, 0.0, a.shape[0])


def controlled_unitary(u: np.ndarray) -> np.ndarray:
    return controlled(u)
