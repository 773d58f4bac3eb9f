"""Binary field files: a magic line, a JSON header line, then float64 vectors.

Layout::

    HPF1\\n
    {"version": 1, "manifold": "t3", "dims": [48, 48, 48], ..., "order": "last-axis-fastest"}\\n
    <3 * prod(dims) little-endian float64 values>
"""

from __future__ import annotations

import json
import logging

import numpy as np

from .field import Field
from .geometry import ManifoldSpec

MAGIC = b"HPF1"
FORMAT_VERSION = 1
ORDER = "last-axis-fastest"
RENORMALIZE_TOL = 1e-9
REJECT_TOL = 1e-6

log = logging.getLogger(__name__)


class FieldFileError(ValueError):
    """The file is not a valid field file."""


def write_field(path, field: Field, charge: int | None = None) -> None:
    """Write ``field``; ``charge`` (the initializer's analytic charge) is stored if given."""
    header = {"version": FORMAT_VERSION, **field.spec.to_header(), "order": ORDER}
    if charge is not None:
        header["charge"] = int(charge)
    with open(path, "wb") as fh:
        fh.write(MAGIC + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(field.data, dtype="<f8").tobytes())


def read_header(path) -> dict:
    return _read(path, payload=False)[0]


def read_field(path) -> tuple[Field, dict]:
    """Load a field file; returns the field and its header."""
    header, data = _read(path, payload=True)
    spec = ManifoldSpec.from_header(header)
    norm = np.linalg.norm(data, axis=-1)
    err = float(np.abs(norm - 1.0).max()) if norm.size else 0.0
    if err > REJECT_TOL:
        raise FieldFileError(f"vectors deviate from unit norm by {err:.2e}")
    if err > RENORMALIZE_TOL:
        log.warning("renormalizing field vectors (max norm error %.2e)", err)
        data = data / norm[..., None]
    return Field(spec, data), header


def _read(path, payload: bool):
    with open(path, "rb") as fh:
        if fh.readline().rstrip(b"\n") != MAGIC:
            raise FieldFileError(f"{path}: not a field file (bad magic)")
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise FieldFileError(f"{path}: corrupt header") from exc
        if header.get("version") != FORMAT_VERSION or header.get("order") != ORDER:
            raise FieldFileError(f"{path}: unsupported version or ordering")
        if not payload:
            return header, None
        dims = tuple(int(n) for n in header["dims"])
        raw = fh.read()
    expected = 3 * int(np.prod(dims)) * 8
    if len(raw) != expected:
        raise FieldFileError(f"{path}: payload has {len(raw)} bytes, expected {expected}")
    data = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(dims + (3,))
    return header, data
