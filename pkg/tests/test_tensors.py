import itertools

import numpy as np
import pytest

from tensorpca.errors import InvalidArgument
from tensorpca.tensors import (COMPLEX, REAL, DenseTensor, Ensemble, SignalVector, correlation, make_spiked,
                               sample_gaussian_tensor, sample_instance, sample_signal, symmetrize,
                               tensor_power_step, unfold_to_matrix)


def test_sampling_is_deterministic_and_real():
    a = sample_gaussian_tensor(2, 3, REAL, seed=7)
    b = sample_gaussian_tensor(2, 3, REAL, seed=7)
    assert a.data.shape == (3, 3)
    assert np.array_equal(a.data, b.data)
    assert a.real and not np.any(a.data.imag)


def test_gaussian_moments():
    rng = np.random.default_rng(0)
    draws = np.array([sample_gaussian_tensor(1, 1, REAL, rng).data[0].real for _ in range(20_000)])
    assert abs(draws.mean()) < 3 / np.sqrt(draws.size)
    cplx = sample_gaussian_tensor(1, 100_000, COMPLEX, 1).data
    assert abs(np.var(cplx.real) - 0.5) < 0.007
    assert abs(np.var(cplx.imag) - 0.5) < 0.007


def test_expected_squared_norm():
    rng = np.random.default_rng(3)
    norms = np.array([sample_gaussian_tensor(3, 4, REAL, rng).norm() ** 2 for _ in range(2000)])
    assert abs(norms.mean() - 64) < 3 * norms.std() / np.sqrt(norms.size)


def test_invalid_sizes():
    with pytest.raises(InvalidArgument):
        sample_gaussian_tensor(0, 3)
    with pytest.raises(InvalidArgument):
        sample_gaussian_tensor(2, -1)
    with pytest.raises(InvalidArgument):
        Ensemble("quaternion")


def test_symmetrize_examples():
    T = symmetrize(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert np.allclose(T.data, [[0, 0.5], [0.5, 0]])
    R = sample_gaussian_tensor(3, 4, REAL, 2)
    S = symmetrize(R)
    assert S.is_symmetric()
    assert np.allclose(symmetrize(S).data, S.data, atol=1e-12)
    sym_ens = sample_gaussian_tensor(3, 3, Ensemble("real", True), 5)
    assert sym_ens.symmetric and sym_ens.is_symmetric()


def test_make_spiked():
    noise = sample_gaussian_tensor(3, 4, REAL, 1)
    sig = sample_signal(4, 2)
    assert np.isclose(np.linalg.norm(sig.vector), 2.0)
    inst = make_spiked(0.0, sig, noise)
    assert np.array_equal(inst.t0.data, noise.data)
    pure = make_spiked(1.0, SignalVector([np.sqrt(2), 0]), np.zeros((2, 2)))
    assert np.allclose(pure.t0.data, [[2, 0], [0, 0]])
    inst = make_spiked(0.7, sig, noise)
    v = sig.vector
    assert np.allclose(inst.t0.data - 0.7 * np.einsum("i,j,k->ijk", v, v, v), noise.data, atol=1e-12)
    with pytest.raises(InvalidArgument):
        make_spiked(1.0, sample_signal(3, 0), noise)


def test_sample_instance_streams():
    a = sample_instance(3, 5, 0.4, REAL, seed=11)
    b = sample_instance(3, 5, 0.4, REAL, seed=11)
    assert np.array_equal(a.t0.data, b.t0.data)
    assert np.array_equal(a.signal.vector, b.signal.vector)


def test_correlation():
    assert correlation([1, 0], [0, 1]) == 0
    v = np.array([0.3, -1.2, 2.0])
    assert np.isclose(correlation(v, -3 * v), 1.0)
    assert abs(correlation([1, 1], [1, 0]) - 0.70710678) < 1e-8
    with pytest.raises(InvalidArgument):
        correlation([0, 0], [1, 0])


def _brute_power_step(T, u):
    N, p = T.shape[0], T.ndim
    x = np.zeros(N, dtype=complex)
    for mu in range(N):
        for rest in itertools.product(range(N), repeat=p - 1):
            x[mu] += T[(mu,) + rest] * np.prod([u[r] for r in rest])
    return x.real


@pytest.mark.parametrize("p,N", [(2, 5), (3, 4), (4, 3)])
def test_power_step_against_loops(p, N):
    T = sample_gaussian_tensor(p, N, COMPLEX, p * N)
    u = np.random.default_rng(1).standard_normal(N)
    u /= np.linalg.norm(u)
    ref = _brute_power_step(T.data, u)
    assert np.allclose(tensor_power_step(T, u), ref, rtol=1e-10, atol=1e-12)


def test_power_step_fixed_point_and_zero():
    v = sample_signal(5, 3).vector
    T = DenseTensor(np.einsum("i,j,k->ijk", v, v, v), real=True)
    x = tensor_power_step(T, v / np.linalg.norm(v))
    assert np.isclose(correlation(x, v), 1.0)
    assert not np.any(tensor_power_step(np.zeros((3, 3, 3)), np.array([1.0, 0, 0])))
    with pytest.raises(InvalidArgument):
        tensor_power_step(T, np.ones(5))


def test_power_step_boosts_correlation():
    inst = sample_instance(4, 10, 1.0, REAL, seed=4)
    v = inst.signal.vector / np.sqrt(10)
    rng = np.random.default_rng(0)
    w = rng.standard_normal(10)
    w -= w.dot(v) * v
    w /= np.linalg.norm(w)
    u = 0.5 * v + np.sqrt(0.75) * w
    x = tensor_power_step(inst, u)
    assert correlation(x, v) > 0.5


def test_unfold():
    T = sample_gaussian_tensor(4, 3, REAL, 9)
    M = unfold_to_matrix(T, 2)
    assert M.shape == (9, 9)
    for idx in itertools.product(range(3), repeat=4):
        assert M[idx[0] * 3 + idx[1], idx[2] * 3 + idx[3]] == T.data[idx]
    assert np.isclose(np.linalg.norm(M), T.norm())
    P = sample_gaussian_tensor(2, 4, REAL, 1)
    assert np.array_equal(unfold_to_matrix(P, 1), P.data)
    with pytest.raises(InvalidArgument):
        unfold_to_matrix(T, 4)
