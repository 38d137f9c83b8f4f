"""JSON shapes for matrices, channels and polynomial fixtures."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .channels import KrausChannel
from .errors import ValidationError


def matrix_to_json(m) -> dict:
    m = np.atleast_2d(np.asarray(m, dtype=complex))
    rows, cols = m.shape
    # float repr is the shortest string that round-trips (at most 17 digits)
    entries = [[float(z.real), float(z.imag)] for z in m.reshape(-1)]
    return {"rows": rows, "cols": cols, "entries": entries}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"matrix JSON needs rows/cols/entries: {exc}") from None
    if len(entries) != rows * cols:
        raise ValidationError(f"matrix entries length {len(entries)} != rows*cols = {rows * cols}")
    vals = np.array([complex(re, im) for re, im in entries], dtype=complex)
    return vals.reshape(rows, cols)


def channel_to_json(ch: KrausChannel) -> dict:
    return {"d": ch.d, "kraus": [matrix_to_json(k) for k in ch.kraus_ops]}


def channel_from_json(obj: dict) -> KrausChannel:
    try:
        d = int(obj["d"])
        ops = [matrix_from_json(k) for k in obj["kraus"]]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"channel JSON needs d and kraus: {exc}") from None
    try:
        return KrausChannel(d, tuple(ops))
    except ValueError as exc:
        raise ValidationError(f"channel invariant violated (CPTP / shape): {exc}") from None


def poly_to_json(poly, phases=None) -> dict:
    out = {"coeffs": [float(c) for c in poly.coeffs], "parity": poly.parity}
    if phases is not None:
        out["phases"] = [float(p) for p in phases.phases]
        out["convention"] = phases.convention
    return out


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())
