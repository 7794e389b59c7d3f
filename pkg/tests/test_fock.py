import itertools
from math import comb, factorial

import numpy as np
import pytest

from tensorpca.errors import ContractViolation, InvalidArgument
from tensorpca.fock import (FockVector, apply_monomial, basis_state, enumerate_basis, fock_dimension, get_basis,
                            product_state, single_particle_density_matrix, tensor_to_fock)
from tensorpca.tensors import REAL, sample_gaussian_tensor, symmetrize


def test_enumeration_examples():
    b = enumerate_basis(3, 2)
    assert [tuple(s) for s in b.states] == [(2, 0, 0), (1, 1, 0), (1, 0, 1), (0, 2, 0), (0, 1, 1), (0, 0, 2)]
    assert enumerate_basis(10, 4).dim == 715
    assert enumerate_basis(2, 1).dim == 2


@pytest.mark.parametrize("N", range(1, 13))
def test_dimension_matches_enumeration(N):
    for n in range(0, 7):
        if comb(N + n - 1, n) > 20_000:
            continue
        b = get_basis(N, n)
        assert b.dim == fock_dimension(N, n) == comb(N + n - 1, n)
        assert len({tuple(s) for s in b.states}) == b.dim


def test_rank_unrank_roundtrip():
    b = get_basis(5, 4)
    for i, s in enumerate(b.states):
        assert b.index(tuple(s)) == i
        assert b.unrank(i) == tuple(s)
    assert np.array_equal(b.rank(b.states), np.arange(b.dim))


def test_monomial_examples():
    b = get_basis(2, 2)
    psi = basis_state(b, (2, 0))
    out = apply_monomial([("create", 0), ("annihilate", 0)], psi)
    assert np.allclose(out.amplitudes, 2 * psi.amplitudes)
    one = basis_state(get_basis(2, 1), (1, 0))
    zero = apply_monomial([("annihilate", 1)], one)
    assert zero.norm() == 0
    with pytest.raises(ContractViolation):
        apply_monomial([("create", 0)], psi, result_basis=b)


def _dense_hop(N, n, mu, nu):
    b = get_basis(N, n)
    M = np.zeros((b.dim, b.dim))
    for j, s in enumerate(b.states):
        s = list(s)
        if s[nu] == 0:
            continue
        c = np.sqrt(s[nu])
        s[nu] -= 1
        c *= np.sqrt(s[mu] + 1)
        s[mu] += 1
        M[b.index(tuple(s)), j] += c
    return M


def test_hopping_expectation_against_dense():
    b = get_basis(3, 2)
    rng = np.random.default_rng(0)
    psi = FockVector(b, rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)).normalized()
    for mu, nu in itertools.product(range(3), repeat=2):
        out = apply_monomial([("create", mu), ("annihilate", nu)], psi)
        ref = _dense_hop(3, 2, mu, nu) @ psi.amplitudes
        assert np.allclose(out.amplitudes, ref, atol=1e-12)


def test_canonical_commutation():
    b = get_basis(3, 2)
    for mu, nu in itertools.product(range(3), repeat=2):
        for s in b.states:
            psi = basis_state(b, tuple(s))
            ab = apply_monomial([("annihilate", mu), ("create", nu)], psi)
            ba = apply_monomial([("create", nu), ("annihilate", mu)], psi)
            expected = psi.amplitudes if mu == nu else 0
            assert np.allclose(ab.amplitudes - ba.amplitudes, expected)


def test_product_state():
    N = 4
    v = np.zeros(N)
    v[0] = np.sqrt(N)
    ps = product_state(v, 3)
    assert np.isclose(ps.amplitudes[ps.basis.index((3, 0, 0, 0))], 1.0)
    assert np.isclose(ps.norm(), 1.0)
    w = np.array([1.0, -2.0, 0.5])
    assert np.allclose(product_state(w, 1).amplitudes, w / np.linalg.norm(w))
    r = np.random.default_rng(1).standard_normal(5)
    assert abs(product_state(r, 3).norm() - 1) < 1e-12
    b = get_basis(3, 2)
    amp = product_state(w, 2).amplitudes
    for i, s in enumerate(b.states):
        mult = factorial(2) / np.prod([factorial(k) for k in s])
        assert np.isclose(amp[i], np.sqrt(mult) * np.prod((w / np.linalg.norm(w)) ** s))
    with pytest.raises(InvalidArgument):
        product_state(np.zeros(3), 2)


def test_tensor_to_fock():
    v = np.array([1.0, 2.0, -1.0])
    T = np.einsum("i,j,k->ijk", v, v, v)
    vec, nrm = tensor_to_fock(T)
    assert np.isclose(nrm, np.linalg.norm(v) ** 3)
    assert np.allclose(vec.amplitudes / nrm, product_state(v, 3).amplitudes)
    anti = np.zeros((3, 3))
    anti[0, 1], anti[1, 0] = 1, -1
    assert tensor_to_fock(anti)[1] == 0
    R = sample_gaussian_tensor(2, 3, REAL, 4)
    _, n_r = tensor_to_fock(R)
    assert n_r**2 <= R.norm() ** 2
    S = symmetrize(R)
    assert np.isclose(tensor_to_fock(S)[1], S.norm())
    assert np.allclose(tensor_to_fock(S)[0].amplitudes, tensor_to_fock(R)[0].amplitudes)


def test_density_matrix_examples():
    v = np.array([1.0, 2.0, 0.0, -1.0])
    rho = single_particle_density_matrix(product_state(v, 3)).matrix
    assert np.allclose(rho, np.outer(v, v) / v.dot(v))
    b = get_basis(4, 2)
    rho = single_particle_density_matrix(basis_state(b, (1, 1, 0, 0))).matrix
    assert np.allclose(rho, np.diag([0.5, 0.5, 0, 0]))
    rng = np.random.default_rng(2)
    psi = FockVector(b, rng.standard_normal(b.dim) + 1j * rng.standard_normal(b.dim)).normalized()
    rho = single_particle_density_matrix(psi).matrix
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert abs(np.trace(rho) - 1) < 1e-10
    assert np.linalg.eigvalsh(rho).min() > -1e-10
    for mu, nu in itertools.product(range(4), repeat=2):
        ref = np.vdot(psi.amplitudes, _dense_hop(4, 2, mu, nu) @ psi.amplitudes) / 2
        assert np.isclose(rho[mu, nu], ref)
    with pytest.raises(ContractViolation):
        single_particle_density_matrix(FockVector(b, 2 * psi.amplitudes))
