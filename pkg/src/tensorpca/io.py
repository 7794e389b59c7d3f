"""Binary files for tensors, Fock vectors and dense matrices.

Layout: a 24-byte little-endian header ``(magic "TPCA", version, kind,
field flag, pad, a, b)`` with ``a, b`` unsigned 64-bit integers, followed by
the entries in row-major order as interleaved ``(real, imag)`` float64
pairs.  For tensors ``(a, b) = (order, dim)``, for Fock vectors
``(N, n_bos)``, for matrices ``(rows, cols)``.  Metadata such as seeds and
the ensemble goes to a JSON sidecar ``<path>.json``.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidArgument
from .fock import FockVector, get_basis
from .tensors import DenseTensor, as_tensor

MAGIC = b"TPCA"
VERSION = 1
HEADER = struct.Struct("<4sBBBxQQ")
KIND_TENSOR, KIND_FOCK, KIND_MATRIX = 0, 1, 2
_LE_COMPLEX = np.dtype("<c16")


def _write(path, kind: int, is_real: bool, a: int, b: int, data: np.ndarray, meta: Optional[dict]) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, VERSION, kind, 1 if is_real else 0, a, b))
        fh.write(np.ascontiguousarray(data, dtype=_LE_COMPLEX).tobytes())
    if meta is not None:
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True))


def _read(path, kind: int) -> Tuple[bool, int, int, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise InvalidArgument("file too short for a header")
    magic, version, got, flag, a, b = HEADER.unpack_from(raw)
    if magic != MAGIC or version != VERSION:
        raise InvalidArgument("not a tensorpca binary file")
    if got != kind:
        raise InvalidArgument(f"file holds kind {got}, expected {kind}")
    data = np.frombuffer(raw, dtype=_LE_COMPLEX, offset=HEADER.size).astype(np.complex128)
    return bool(flag), a, b, data


def read_sidecar(path) -> Optional[dict]:
    side = Path(str(path) + ".json")
    return json.loads(side.read_text()) if side.exists() else None


def save_tensor(path, T, meta: Optional[dict] = None) -> None:
    T = as_tensor(T)
    _write(path, KIND_TENSOR, T.real, T.order, T.dim, T.data.ravel(), meta)


def load_tensor(path) -> DenseTensor:
    is_real, order, dim, data = _read(path, KIND_TENSOR)
    if data.size != dim**order:
        raise InvalidArgument("payload size does not match the header")
    return DenseTensor(data.reshape((dim,) * order), real=is_real)


def save_fock(path, state: FockVector, meta: Optional[dict] = None) -> None:
    amps = state.amplitudes
    _write(path, KIND_FOCK, not np.any(np.imag(amps)), state.basis.N, state.basis.n_bos, amps, meta)


def load_fock(path) -> FockVector:
    _, N, n_bos, data = _read(path, KIND_FOCK)
    basis = get_basis(N, n_bos)
    if data.size != basis.dim:
        raise InvalidArgument("payload size does not match the basis")
    return FockVector(basis, data)


def save_matrix(path, M, meta: Optional[dict] = None) -> None:
    M = np.asarray(M)
    if M.ndim != 2:
        raise InvalidArgument("expected a 2-d array")
    _write(path, KIND_MATRIX, not np.iscomplexobj(M), M.shape[0], M.shape[1], M.ravel(), meta)


def load_matrix(path) -> np.ndarray:
    is_real, rows, cols, data = _read(path, KIND_MATRIX)
    if data.size != rows * cols:
        raise InvalidArgument("payload size does not match the header")
    M = data.reshape(rows, cols)
    return M.real.copy() if is_real else M
