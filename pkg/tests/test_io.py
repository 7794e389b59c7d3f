import struct

import numpy as np
import pytest

from tensorpca.errors import InvalidArgument
from tensorpca.fock import FockVector, get_basis
from tensorpca.io import (HEADER, load_fock, load_matrix, load_tensor, read_sidecar, save_fock, save_matrix,
                          save_tensor)
from tensorpca.tensors import COMPLEX, REAL, sample_gaussian_tensor


def test_tensor_roundtrip_and_layout(tmp_path):
    T = sample_gaussian_tensor(3, 4, COMPLEX, 1)
    path = tmp_path / "t.bin"
    save_tensor(path, T, {"seed": 1, "ensemble": "complex"})
    back = load_tensor(path)
    assert np.array_equal(back.data, T.data) and not back.real
    raw = path.read_bytes()
    assert len(raw) == HEADER.size + 16 * 64
    first_re, first_im = struct.unpack_from("<dd", raw, HEADER.size)
    assert first_re == T.data[0, 0, 0].real and first_im == T.data[0, 0, 0].imag
    assert read_sidecar(path) == {"ensemble": "complex", "seed": 1}


def test_real_flag_survives(tmp_path):
    T = sample_gaussian_tensor(2, 3, REAL, 2)
    save_tensor(tmp_path / "r.bin", T)
    assert load_tensor(tmp_path / "r.bin").real
    assert read_sidecar(tmp_path / "r.bin") is None


def test_fock_and_matrix_roundtrip(tmp_path):
    b = get_basis(4, 2)
    psi = FockVector(b, np.arange(b.dim) + 1j)
    save_fock(tmp_path / "f.bin", psi)
    back = load_fock(tmp_path / "f.bin")
    assert back.basis == b and np.array_equal(back.amplitudes, psi.amplitudes)
    M = np.random.default_rng(0).standard_normal((3, 5))
    save_matrix(tmp_path / "m.bin", M)
    assert np.array_equal(load_matrix(tmp_path / "m.bin"), M)


def test_kind_and_magic_checks(tmp_path):
    save_matrix(tmp_path / "m.bin", np.eye(2))
    with pytest.raises(InvalidArgument):
        load_tensor(tmp_path / "m.bin")
    (tmp_path / "junk.bin").write_bytes(b"nope")
    with pytest.raises(InvalidArgument):
        load_tensor(tmp_path / "junk.bin")
