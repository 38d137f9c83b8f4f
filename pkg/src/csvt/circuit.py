"""Register-level circuits over dense matrices.

A circuit is a list of ops on named positions of a register list. Queries
are left symbolic and bound at run time, either to an exact unitary or to
a local channel (Liouville matrix), which lets the same circuit be
evaluated ideally and with approximate black-box implementations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import linalg as la


@dataclass(frozen=True)
class LocalChannel:
    """A channel on a few registers, stored as its (row-stacking) Liouville matrix."""

    liouville: np.ndarray

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.liouville.shape[0])))


@dataclass(frozen=True)
class Op:
    kind: str  # "unitary" | "query" | "kraus"
    targets: tuple
    matrix: np.ndarray | None = field(default=None, repr=False)
    name: str | None = None
    kraus: tuple | None = field(default=None, repr=False)


def controlled(u: np.ndarray) -> np.ndarray:
    n = u.shape[0]
    out = np.eye(2 * n, dtype=complex)
    out[n:, n:] = u
    return out


def inverse_name(name: str) -> str:
    return name[:-4] if name.endswith("_dag") else name + "_dag"


class Circuit:
    def __init__(self, dims: Sequence[int], ops: Sequence[Op] = ()):
        self.dims = tuple(int(x) for x in dims)
        self.ops = list(ops)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    def _check(self, targets) -> tuple:
        targets = tuple(int(t) for t in targets)
        if len(set(targets)) != len(targets) or any(t < 0 or t >= len(self.dims) for t in targets):
            raise ValueError(f"bad targets {targets} for {len(self.dims)} registers")
        return targets

    def unitary_op(self, m, targets) -> "Circuit":
        targets = self._check(targets)
        m = np.asarray(m, dtype=complex)
        n = int(np.prod([self.dims[t] for t in targets]))
        if m.shape != (n, n):
            raise ValueError(f"gate of shape {m.shape} on registers of total dimension {n}")
        self.ops.append(Op("unitary", targets, matrix=m))
        return self

    def query(self, name: str, targets) -> "Circuit":
        self.ops.append(Op("query", self._check(targets), name=name))
        return self

    def kraus_op(self, ops, targets) -> "Circuit":
        self.ops.append(Op("kraus", self._check(targets), kraus=tuple(np.asarray(k) for k in ops)))
        return self

    def extend(self, other: "Circuit", mapping: Sequence[int]) -> "Circuit":
        """Append ``other`` with its register i placed on our register mapping[i]."""
        for op in other.ops:
            tg = tuple(mapping[t] for t in op.targets)
            self.ops.append(Op(op.kind, self._check(tg), op.matrix, op.name, op.kraus))
        return self

    def inverse(self) -> "Circuit":
        ops = []
        for op in reversed(self.ops):
            if op.kind == "unitary":
                ops.append(Op("unitary", op.targets, matrix=la.dag(op.matrix)))
            elif op.kind == "query":
                ops.append(Op("query", op.targets, name=inverse_name(op.name)))
            else:
                raise ValueError("a circuit containing channels has no inverse")
        return Circuit(self.dims, ops)

    def controlled(self) -> "Circuit":
        """Add a control qubit as register 0; queries gain a "c" prefix."""
        ops = []
        for op in self.ops:
            tg = (0,) + tuple(t + 1 for t in op.targets)
            if op.kind == "unitary":
                ops.append(Op("unitary", tg, matrix=controlled(op.matrix)))
            elif op.kind == "query":
                ops.append(Op("query", tg, name="c" + op.name))
            else:
                raise ValueError("cannot control a circuit containing channels")
        return Circuit((2,) + self.dims, ops)

    def query_counts(self) -> dict:
        out: dict = {}
        for op in self.ops:
            if op.kind == "query":
                out[op.name] = out.get(op.name, 0) + 1
        return out

    def unitary(self, impl: Mapping[str, np.ndarray] | None = None) -> np.ndarray:
        impl = impl or {}
        u = np.eye(self.dim, dtype=complex)
        for op in self.ops:
            if op.kind == "unitary":
                m = op.matrix
            elif op.kind == "query":
                m = impl[op.name]
                if isinstance(m, LocalChannel):
                    raise ValueError(f"query {op.name} is bound to a channel; use run()")
            else:
                raise ValueError("circuit contains channels; use run()")
            u = apply_left(u, self.dims, op.targets, m)
        return u

    def run(self, rho: np.ndarray, impl: Mapping[str, object] | None = None,
            extra_dims: Sequence[int] = ()) -> np.ndarray:
        """Evolve a density matrix on (extra registers) kron (circuit registers).

        ``extra_dims`` lets a reference system ride along untouched, e.g. to
        push a Choi state through the circuit.
        """
        impl = impl or {}
        off = len(extra_dims)
        dims = tuple(extra_dims) + self.dims
        for op in self.ops:
            tg = tuple(t + off for t in op.targets)
            if op.kind == "unitary":
                rho = apply_unitary(rho, dims, tg, op.matrix)
            elif op.kind == "kraus":
                rho = apply_kraus(rho, dims, tg, op.kraus)
            else:
                m = impl[op.name]
                if isinstance(m, LocalChannel):
                    rho = apply_liouville(rho, dims, tg, m.liouville)
                else:
                    rho = apply_unitary(rho, dims, tg, m)
        return rho


def _perm(dims, targets):
    rest = [i for i in range(len(dims)) if i not in targets]
    order = list(targets) + rest
    dt = int(np.prod([dims[t] for t in targets]))
    return order, dt, int(np.prod(dims)) // dt


def apply_left(m: np.ndarray, dims, targets, op: np.ndarray) -> np.ndarray:
    """op (on targets) @ m, where m has rows indexed by the registers."""
    n = len(dims)
    order, dt, do = _perm(dims, targets)
    cols = m.shape[1]
    t = m.reshape(tuple(dims) + (cols,)).transpose(order + [n]).reshape(dt, do * cols)
    t = (op @ t).reshape([dims[i] for i in order] + [cols])
    inv = np.argsort(order + [n])
    return t.transpose(inv).reshape(m.shape)


def _split(rho, dims, targets):
    n = len(dims)
    order, dt, do = _perm(dims, targets)
    t = rho.reshape(tuple(dims) * 2).transpose(order + [i + n for i in order])
    return t.reshape(dt, do, dt, do), order


def _join(t, dims, order):
    n = len(dims)
    shape = [dims[i] for i in order]
    t = t.reshape(shape + shape)
    inv = np.argsort(order + [i + n for i in order])
    D = int(np.prod(dims))
    return t.transpose(inv).reshape(D, D)


def apply_unitary(rho, dims, targets, u):
    t, order = _split(rho, dims, targets)
    t = np.tensordot(u, t, axes=(1, 0))
    t = np.tensordot(t, u.conj(), axes=(2, 1)).transpose(0, 1, 3, 2)
    return _join(t, dims, order)


def apply_kraus(rho, dims, targets, kraus):
    t, order = _split(rho, dims, targets)
    acc = 0
    for k in kraus:
        s = np.tensordot(k, t, axes=(1, 0))
        acc = acc + np.tensordot(s, k.conj(), axes=(2, 1)).transpose(0, 1, 3, 2)
    return _join(acc, dims, order)


def apply_liouville(rho, dims, targets, mat):
    t, order = _split(rho, dims, targets)
    dt, do = t.shape[0], t.shape[1]
    s = t.transpose(0, 2, 1, 3).reshape(dt * dt, do * do)
    s = (mat @ s).reshape(dt, dt, do, do).transpose(0, 2, 1, 3)
    return _join(s, dims, order)


def liouville_of(circuit: Circuit, impl: Mapping[str, object] | None = None) -> np.ndarray:
    """Liouville matrix of a (possibly noisy) circuit, built column by column."""
    D = circuit.dim
    cols = []
    for idx in range(D * D):
        e = np.zeros(D * D, dtype=complex)
        e[idx] = 1.0
        cols.append(circuit.run(e.reshape(D, D), impl).reshape(-1))
    return np.array(cols).T


def choi_of(circuit: Circuit, impl: Mapping[str, object] | None = None) -> np.ndarray:
    """Normalized Choi state (circuit output first, reference second)."""
    D = circuit.dim
    phi = la.max_entangled_state(D)
    # reference first while running, then swap factors to output-first
    out = circuit.run(phi, impl, extra_dims=(D,))
    return out.reshape(D, D, D, D).transpose(1, 0, 3, 2).reshape(D * D, D * D)
