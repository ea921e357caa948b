"""State files, deterministic JSON and run manifests.

State file layout (little endian):

    b"PFVW" | u32 version | 32-byte SHA-256 of the system | u64 dimension | dimension x (f64 re, f64 im)
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import StateFileError
from .model import SystemSpec, spec_hash
from .state import QuantumState

MAGIC = b"PFVW"
VERSION = 1
_HEADER = struct.Struct("<4sI32sQ")


def save_state(state: QuantumState, spec: SystemSpec, path: str | Path) -> None:
    coeffs = np.ascontiguousarray(state.coefficients, dtype="<c16")
    header = _HEADER.pack(MAGIC, VERSION, spec_hash(spec), coeffs.shape[0])
    Path(path).write_bytes(header + coeffs.tobytes())


def load_state(path: str | Path, spec: SystemSpec) -> QuantumState:
    """Read a state written for ``spec``; any mismatch or damage raises StateFileError."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise StateFileError(f"corrupt state file {path}: truncated header")
    magic, version, digest, dim = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StateFileError(f"corrupt state file {path}: bad magic bytes")
    if version != VERSION:
        raise StateFileError(f"unsupported state file version {version}")
    if digest != spec_hash(spec):
        raise StateFileError("state file hash mismatch: it was written for a different system")
    payload = data[_HEADER.size:]
    if len(payload) != 16 * dim:
        raise StateFileError(f"corrupt state file {path}: expected {16 * dim} payload bytes, found {len(payload)}")
    coeffs = np.frombuffer(payload, dtype="<c16").astype(complex)
    try:
        return QuantumState(coeffs)
    except ValueError as exc:
        raise StateFileError(f"corrupt state file {path}: {exc}") from None


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    return obj


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g") if obj != int(obj) or abs(obj) >= 1e17 else format(obj, ".1f")
    if isinstance(obj, int):
        return str(obj)
    return json.dumps(obj)


def dumps_json(doc) -> str:
    """JSON text with every float written to 17 significant digits; key order is preserved."""
    return _encode(_plain(doc), 2, 0) + "\n"


def write_json(path: str | Path, doc) -> Path:
    path = Path(path)
    path.write_text(dumps_json(doc), encoding="utf-8")
    return path


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
