"""Binary matrix-set files.

A file is one JSON header line followed by raw little-endian float64 data::

    {"magic": "MJBD1", "m": 10, "d": 15, "dtype": "f64le", "extras": {...}}\\n
    <m * d * d doubles, matrices consecutive, each row-major>

A single rectangular matrix (a diagonalizer) is stored with ``m = 1`` and an
extra ``cols`` header field; the payload is then ``d * cols`` doubles.
"""
from __future__ import annotations

import json
import os
from typing import NamedTuple

import numpy as np

from .core import MatrixSet
from .exceptions import BJBDError

MAGIC = "MJBD1"
DTYPE = "f64le"
_LE = np.dtype("<f8")


class FormatError(BJBDError, ValueError):
    """A file does not follow the matrix-set format."""


class MatrixSetFile(NamedTuple):
    array: np.ndarray  # (m, d, d) or (d, cols)
    extras: dict


def _header(m: int, d: int, extras, cols=None) -> bytes:
    h = {"magic": MAGIC, "m": int(m), "d": int(d), "dtype": DTYPE}
    if cols is not None:
        h["cols"] = int(cols)
    if extras:
        h["extras"] = extras
    return (json.dumps(h, sort_keys=True, separators=(",", ":")) + "\n").encode("utf-8")


def dumps(obj, extras=None) -> bytes:
    """Serialize a matrix set ``(m, d, d)`` or a single ``d x cols`` matrix."""
    if isinstance(obj, MatrixSet):
        arr = obj.matrices
    else:
        arr = np.asarray(obj, dtype=np.float64)
    if arr.ndim == 3:
        m, d, d2 = arr.shape
        if d != d2:
            raise FormatError(f"matrices must be square, got {arr.shape[1:]}")
        head = _header(m, d, extras)
    elif arr.ndim == 2:
        head = _header(1, arr.shape[0], extras, cols=arr.shape[1])
    else:
        raise FormatError(f"cannot store an array with {arr.ndim} dimensions")
    return head + np.ascontiguousarray(arr, dtype=_LE).tobytes(order="C")


def loads(data: bytes) -> MatrixSetFile:
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError("missing header line")
    try:
        h = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad header: {exc}") from exc
    if not isinstance(h, dict) or h.get("magic") != MAGIC:
        raise FormatError("not a matrix-set file (bad magic)")
    if h.get("dtype") != DTYPE:
        raise FormatError(f"unsupported dtype {h.get('dtype')!r}")
    try:
        m, d = int(h["m"]), int(h["d"])
        cols = int(h["cols"]) if "cols" in h else None
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad header fields: {exc}") from exc
    if m < 1 or d < 1 or (cols is not None and (cols < 1 or m != 1)):
        raise FormatError("header dimensions out of range")
    shape = (d, cols) if cols is not None else (m, d, d)
    payload = data[nl + 1:]
    expect = 8 * int(np.prod(shape))
    if len(payload) != expect:
        raise FormatError(f"payload has {len(payload)} bytes, expected {expect}")
    arr = np.frombuffer(payload, dtype=_LE).reshape(shape).astype(np.float64)
    return MatrixSetFile(arr, h.get("extras", {}) or {})


def write(path, obj, extras=None) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(obj, extras))


def read(path) -> MatrixSetFile:
    with open(path, "rb") as fh:
        return loads(fh.read())


def read_set(path) -> MatrixSet:
    f = read(path)
    if f.array.ndim != 3:
        raise FormatError(f"{os.fspath(path)} holds a single rectangular matrix, not a set")
    return MatrixSet(f.array)


def read_matrix(path) -> np.ndarray:
    """A stored rectangular matrix, or the only matrix of a one-element set."""
    f = read(path)
    if f.array.ndim == 3:
        if f.array.shape[0] != 1:
            raise FormatError("expected a single matrix")
        return f.array[0]
    return f.array
