"""Binary container for complex arrays (channel caches, codebook dumps).

Layout: 4-byte magic, then little-endian u32 fields (version, flags, M, N,
K), then K*M*N complex values as interleaved (re, im) float64 little-endian
in C order of the (K, M, N) array. Flag bit 0 records whether the stored
array carried an explicit trailing matrix dimension.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"CXA1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")
_FLAG_MATRIX = 1


def save_complex_array(path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.complex128)
    if values.ndim == 2:
        k, m = values.shape
        n = 1
        flags = 0
        cube = values[:, :, None]
    elif values.ndim == 3:
        k, m, n = values.shape
        flags = _FLAG_MATRIX
        cube = values
    else:
        raise ValueError("expected a (K, M) or (K, M, N) complex array")

    interleaved = np.empty((k, m, n, 2), dtype="<f8")
    interleaved[..., 0] = cube.real
    interleaved[..., 1] = cube.imag
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, flags, m, n, k))
        fh.write(interleaved.tobytes())


def load_complex_array(path) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, flags, m, n, k = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported version {version}")
        payload = fh.read()
    expected = k * m * n * 2 * 8
    if len(payload) != expected:
        raise ValueError(f"{path}: expected {expected} payload bytes, got {len(payload)}")
    interleaved = np.frombuffer(payload, dtype="<f8").reshape(k, m, n, 2)
    cube = interleaved[..., 0] + 1j * interleaved[..., 1]
    if flags & _FLAG_MATRIX:
        return cube
    return cube[:, :, 0]
