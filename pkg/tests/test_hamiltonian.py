from math import comb, factorial

import numpy as np
import pytest
from oracles import dense_from_monomials, tilde_by_loops

from tensorpca.errors import ContractViolation, DegenerateOperatorError, InvalidArgument, SizeError
from tensorpca.fock import FockVector, get_basis, product_state
from tensorpca.hamiltonian import (build_even, build_hamiltonian, build_odd, leg_permutations, materialize_dense,
                                   quantum_expectation, tilde_tensor)
from tensorpca.tensors import COMPLEX, REAL, DenseTensor, outer_power, sample_gaussian_tensor, symmetrize


def _signal(N):
    v = np.zeros(N)
    v[0] = np.sqrt(N)
    return v


@pytest.mark.parametrize("p,N,n", [(2, 4, 1), (2, 3, 3), (4, 3, 2), (4, 4, 3)])
def test_even_matches_monomial_oracle(p, N, n):
    T = sample_gaussian_tensor(p, N, COMPLEX, 10 * p + N + n)
    H = build_even(T, n).materialize_dense()
    assert np.abs(H - dense_from_monomials(T.data, n)).max() < 1e-10


def test_single_boson_reduction():
    T = sample_gaussian_tensor(2, 5, COMPLEX, 1)
    H = materialize_dense(build_even(T, 1))
    assert np.allclose(H, 0.5 * (T.data + T.data.conj().T))


def test_even_signal_diagonal_energy():
    p, N, n, lam = 4, 5, 3, 0.7
    T = DenseTensor(lam * outer_power(_signal(N), p), real=True)
    H = build_even(T, n).materialize_dense()
    assert np.allclose(H, np.diag(np.diag(H)))
    top = get_basis(N, n).index((n, 0, 0, 0, 0))
    E0 = lam * factorial(p // 2) * comb(n, p // 2) * N ** (p // 2)
    assert np.isclose(H[top, top].real, E0)
    psi = product_state(_signal(N), n)
    out = build_even(T, n).apply(psi)
    assert np.allclose(out.amplitudes, E0 * psi.amplitudes)
    assert np.isclose(quantum_expectation(build_even(T, n), psi), E0)


def test_hermitian_on_symmetric_input():
    T = symmetrize(sample_gaussian_tensor(4, 4, REAL, 3))
    H = build_even(T, 2).materialize_dense()
    assert np.abs(H - H.conj().T).max() < 1e-12


def test_odd_equals_even_of_tilde():
    T = sample_gaussian_tensor(3, 3, COMPLEX, 5)
    Tt = tilde_by_loops(T.data)
    assert np.allclose(tilde_tensor(T).data, Tt)
    Hodd = build_odd(T, 2).materialize_dense()
    Heven = build_even(DenseTensor(Tt), 2).materialize_dense()
    assert np.array_equal(Hodd, Heven)


def test_odd_contracted_kernel_matches_dense():
    T = sample_gaussian_tensor(3, 4, COMPLEX, 8)
    dense = build_odd(T, 3).materialize_dense()
    contracted = build_odd(T, 3, tilde_cap=0).materialize_dense()
    assert np.abs(dense - contracted).max() < 1e-10


def test_odd_signal_energy_and_zero():
    p, N, n, lam = 3, 4, 2, 0.6
    T = DenseTensor(lam * outer_power(_signal(N), p), real=True)
    H = build_odd(T, n).materialize_dense()
    top = get_basis(N, n).index((n, 0, 0, 0))
    assert np.isclose(H[top, top].real, lam**2 * factorial(p - 1) * comb(n, p - 1) * N**p)
    assert not np.any(build_odd(np.zeros((3, 3, 3)), 2).materialize_dense())


def test_degenerate_and_invalid():
    with pytest.raises(DegenerateOperatorError):
        build_even(sample_gaussian_tensor(4, 3, REAL, 0), 1)
    with pytest.raises(DegenerateOperatorError):
        build_odd(sample_gaussian_tensor(3, 3, REAL, 0), 1)
    H = build_even(sample_gaussian_tensor(2, 3, REAL, 0), 2)
    with pytest.raises(InvalidArgument):
        H.apply(product_state(np.ones(3), 1))
    with pytest.raises(SizeError):
        build_even(sample_gaussian_tensor(2, 30, REAL, 0), 4).materialize_dense(cap=100)
    psi = FockVector(get_basis(3, 2), np.ones(6))
    with pytest.raises(ContractViolation):
        quantum_expectation(H, psi)


def test_linearity_and_zero():
    T = sample_gaussian_tensor(4, 4, COMPLEX, 9)
    H = build_even(T, 3)
    rng = np.random.default_rng(0)
    x, y = (rng.standard_normal(H.dim) + 1j * rng.standard_normal(H.dim) for _ in range(2))
    a, b = 0.3 - 1j, 2.0
    assert np.allclose(H.matvec(a * x + b * y), a * H.matvec(x) + b * H.matvec(y), atol=1e-12)
    Z = build_even(np.zeros((3, 3, 3, 3)), 2)
    assert not np.any(Z.materialize_dense())
    psi = product_state(np.ones(3), 2)
    assert quantum_expectation(Z, psi) == 0


def test_rotational_covariance():
    T = sample_gaussian_tensor(4, 4, REAL, 12)
    O, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((4, 4)))
    rotated = np.einsum("ai,bj,ck,dl,ijkl->abcd", O, O, O, O, T.data.real)
    e1 = np.linalg.eigvalsh(build_even(T, 2).materialize_dense())
    e2 = np.linalg.eigvalsh(build_even(rotated, 2).materialize_dense())
    assert np.allclose(e1, e2, atol=1e-8)


def test_leg_permutation_insensitivity():
    T = sample_gaussian_tensor(4, 3, COMPLEX, 2)
    ref = build_even(T, 3).materialize_dense()
    for perm in leg_permutations(4):
        H = build_even(T.data.transpose(perm), 3).materialize_dense()
        assert np.allclose(H, ref, atol=1e-12)


def test_norm_bounds_dominate_spectrum():
    for p, seed in ((4, 1), (3, 2)):
        T = sample_gaussian_tensor(p, 4, COMPLEX, seed)
        H = build_hamiltonian(T, 3)
        ev = np.linalg.eigvalsh(H.materialize_dense())
        top = max(abs(ev[0]), abs(ev[-1]))
        assert top <= H.norm_bound * (1 + 1e-10)
        assert H.norm_bound <= H.coarse_norm_bound * (1 + 1e-10)


def test_element_and_column_agree_with_dense():
    T = sample_gaussian_tensor(3, 3, COMPLEX, 6)
    H = build_odd(T, 3)
    M = H.materialize_dense()
    b = H.basis
    for j in range(b.dim):
        col = H.column(b.unrank(j))
        dense_col = np.zeros(b.dim, dtype=complex)
        for i, val in col.items():
            dense_col[i] = val
        assert np.allclose(dense_col, M[:, j], atol=1e-12)
        for i in range(b.dim):
            assert abs(H.element(b.unrank(i), b.unrank(j)) - M[i, j]) < 1e-12
