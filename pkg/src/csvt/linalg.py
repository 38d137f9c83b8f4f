"""Dense complex linear algebra and tensor-factor bookkeeping.

Conventions used across the package:

* Matrices are numpy ``complex128`` arrays; tensor factors are ordered
  left to right, so factor 0 is the most significant index.
* Vectorization stacks rows, ``vec(rho) = rho.reshape(-1)``, hence
  ``vec(A rho B) = (A kron B.T) vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

# structural predicates (hermitian, unitary, psd, trace one)
ATOL = 1e-9
# Frobenius tolerance for reconstruction checks
RECON_TOL = 1e-10


@dataclass(frozen=True)
class TensorSpace:
    """Ordered tensor factors of a composite Hilbert space."""

    dims: tuple[int, ...]

    def __init__(self, dims: Iterable[int]):
        dims = tuple(int(x) for x in dims)
        if not dims or any(x < 1 for x in dims):
            raise ValueError(f"invalid factor dimensions {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self) -> int:
        return len(self.dims)


def _dims(space) -> tuple[int, ...]:
    if isinstance(space, TensorSpace):
        return space.dims
    return tuple(int(x) for x in space)


def _check_square(m: np.ndarray, dims: Sequence[int]) -> None:
    n = int(np.prod(dims))
    if m.ndim != 2 or m.shape != (n, n):
        raise ValueError(f"matrix of shape {m.shape} does not match factors {tuple(dims)}")


def dag(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def kron(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of any number of operators, left factor most significant."""
    if not ops:
        raise ValueError("kron needs at least one operand")
    return reduce(np.kron, [np.asarray(o) for o in ops])


def ket(index: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def proj(index: int, dim: int) -> np.ndarray:
    p = np.zeros((dim, dim), dtype=complex)
    p[index, index] = 1.0
    return p


def max_entangled(d: int) -> np.ndarray:
    """|Phi+> = sum_i |ii> / sqrt(d)."""
    return np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)


def max_entangled_state(d: int) -> np.ndarray:
    v = max_entangled(d)
    return np.outer(v, v.conj())


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1)


def unvec(v: np.ndarray, rows: int | None = None) -> np.ndarray:
    n = int(round(np.sqrt(v.size))) if rows is None else rows
    return np.asarray(v).reshape(n, -1)


def partial_trace(m: np.ndarray, space, keep: Iterable[int]) -> np.ndarray:
    """Trace out every factor not listed in ``keep``; kept factors stay in order."""
    dims = _dims(space)
    _check_square(m, dims)
    n = len(dims)
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise IndexError(f"factor index out of range for {n} factors: {keep}")
    t = m.reshape(dims + dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out = keep + [k + n for k in keep]
    kd = int(np.prod([dims[k] for k in keep])) if keep else 1
    return np.einsum(t, row + col, out).reshape(kd, kd)


def partial_transpose(m: np.ndarray, space, factor) -> np.ndarray:
    """Transpose the listed factor(s) only; an involution."""
    dims = _dims(space)
    _check_square(m, dims)
    n = len(dims)
    factors = [factor] if np.isscalar(factor) else list(factor)
    if any(f < 0 or f >= n for f in factors):
        raise IndexError(f"factor index out of range for {n} factors: {factors}")
    axes = list(range(2 * n))
    for f in factors:
        axes[f], axes[f + n] = axes[f + n], axes[f]
    return m.reshape(dims + dims).transpose(axes).reshape(m.shape)


def permutation_operator(space, perm: Sequence[int]) -> np.ndarray:
    """Unitary moving tensor factor ``t`` to position ``perm[t]``.

    With this convention ``P(p1) @ P(p2) == P(p1 o p2)`` where
    ``(p1 o p2)[t] = p1[p2[t]]``.
    """
    dims = _dims(space)
    n = len(dims)
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of {n} factors")
    inv = [0] * n
    for t, p in enumerate(perm):
        inv[p] = t
    D = int(np.prod(dims))
    eye = np.eye(D, dtype=complex).reshape(dims + (D,))
    return eye.transpose(inv + [n]).reshape(D, D)


def swap(d1: int, d2: int | None = None) -> np.ndarray:
    d2 = d1 if d2 is None else d2
    return permutation_operator((d1, d2), (1, 0))


def svd(m: np.ndarray):
    """Returns (U, s, V) with m = U diag(s) V^dagger and s non-increasing."""
    u, s, vh = np.linalg.svd(m)
    return u, s, dag(vh)


def eig(m: np.ndarray):
    return np.linalg.eig(m)


def expm(m: np.ndarray) -> np.ndarray:
    return scipy.linalg.expm(m)


def schatten_norm(m: np.ndarray, p) -> float:
    s = np.linalg.svd(m, compute_uv=False)
    if p in (np.inf, "inf"):
        return float(s.max(initial=0.0))
    if p == 1:
        return float(s.sum())
    if p == 2:
        return float(np.sqrt(np.sum(s**2)))
    raise ValueError(f"unsupported Schatten index {p}")


def trace_norm(m: np.ndarray) -> float:
    """Schatten-1 norm; uses eigvalsh when the input is Hermitian."""
    if is_hermitian(m, 1e-12):
        return float(np.abs(np.linalg.eigvalsh((m + dag(m)) / 2)).sum())
    return schatten_norm(m, 1)


def op_norm(m: np.ndarray) -> float:
    return schatten_norm(m, np.inf)


def is_hermitian(m: np.ndarray, atol: float = ATOL) -> bool:
    return m.shape[0] == m.shape[1] and bool(np.max(np.abs(m - dag(m)), initial=0.0) <= atol)


def is_unitary(m: np.ndarray, atol: float = ATOL) -> bool:
    n = m.shape[0]
    return m.shape == (n, n) and bool(np.max(np.abs(m @ dag(m) - np.eye(n))) <= atol)


def is_psd(m: np.ndarray, atol: float = ATOL) -> bool:
    if not is_hermitian(m, atol):
        return False
    return bool(np.linalg.eigvalsh((m + dag(m)) / 2).min() >= -atol)


def is_density(m: np.ndarray, atol: float = ATOL) -> bool:
    return is_psd(m, atol) and abs(np.trace(m) - 1) <= atol


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((m + dag(m)) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ dag(v)


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """F = ||sqrt(rho) sqrt(sigma)||_1^2 for density matrices."""
    for name, m in (("rho", rho), ("sigma", sigma)):
        if not is_density(m):
            raise ValueError(f"{name} is not a PSD unit-trace matrix")
    s = np.linalg.svd(psd_sqrt(rho) @ psd_sqrt(sigma), compute_uv=False)
    return float(min(1.0, s.sum() ** 2))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    return 0.5 * trace_norm(rho - sigma)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random mixed state from a Ginibre matrix (full rank by default)."""
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ dag(g)
    return rho / np.trace(rho).real


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary via QR with the phase fix on the R diagonal."""
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_hermitian(d: int, rng: np.random.Generator, norm: float | None = None) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (g + dag(g)) / 2
    if norm is not None:
        h *= norm / op_norm(h)
    return h


def herm_fn(h: np.ndarray, fn) -> np.ndarray:
    """Apply a scalar function to a Hermitian matrix through its eigenbasis."""
    w, v = np.linalg.eigh((h + dag(h)) / 2)
    return (v * fn(w)) @ dag(v)


PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
