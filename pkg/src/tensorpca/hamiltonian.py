"""Bosonic Hamiltonians built from tensors.

For an even-order tensor ``T`` with ``q = p/2`` the operator is

    H(T) = 1/2 * ( sum T[mu_1..mu_q, nu_1..nu_q] a+_mu1 .. a+_muq a_nu1 .. a_nuq + h.c. )

restricted to the ``n_bos``-particle symmetric subspace.  Writing ``B`` for the
stack of all ordered ``q``-fold annihilators (see
:func:`tensorpca.fock.annihilation_stack`) and ``M`` for ``T`` unfolded into an
``N^q x N^q`` matrix, ``H = B^H (I ⊗ M_h) B`` with ``M_h = (M + M^H)/2``.  This
factorization gives the matrix-free apply used everywhere below.

Odd orders are reduced to the even order ``2(p-1)`` through the tensor
``T~`` obtained by contracting two copies of ``T`` on their last leg (see
:func:`tilde_tensor`).
"""

from __future__ import annotations

from functools import cached_property
from itertools import permutations
from math import comb, factorial, sqrt
from typing import Dict, Tuple

import numpy as np
from scipy.linalg import eigvalsh

from .errors import DegenerateOperatorError, InvalidArgument, SizeError
from .fock import (FockVector, OccupationBasis, annihilation_stack, get_basis,
                   require_normalized)
from .tensors import DenseTensor, as_tensor

DENSE_CAP = 5000
TILDE_CAP = 4 * 10**6  # entries of the derived odd-order tensor kept in memory


def tilde_tensor(T) -> DenseTensor:
    """Order ``2(p-1)`` tensor used for odd ``p``.

    With ``h = (p-1)/2`` and index groups ``a = (mu_1..mu_h)``,
    ``b = (mu_{h+1}..mu_{p-1})`` (and likewise for ``nu``):
    ``T~[a_mu, a_nu, b_mu, b_nu] = sum_s T[a_mu, b_mu, s] * T[a_nu, b_nu, s]``.
    """
    T = as_tensor(T)
    p, N = T.order, T.dim
    if p % 2 == 0:
        raise InvalidArgument("tilde_tensor is defined for odd order")
    h = (p - 1) // 2
    blocks = T.data.reshape(N**h, N**h, N)
    out = np.einsum("iks,jls->ijkl", blocks, blocks)
    return DenseTensor(out.reshape((N,) * (2 * (p - 1))), real=T.real)


class _DenseKernel:
    """Hermitian part of the unfolded tensor, stored as a matrix."""

    def __init__(self, M: np.ndarray):
        self.matrix = 0.5 * (M + M.conj().T)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return X @ self.matrix.T

    def dense(self) -> np.ndarray:
        return self.matrix

    def opnorm(self) -> float:
        if self.matrix.shape[0] <= 4096:
            ev = eigvalsh(self.matrix)
            return float(max(abs(ev[0]), abs(ev[-1])))
        return float(np.linalg.norm(self.matrix))


class _ContractedOddKernel:
    """Same operator as the dense kernel of ``T~`` without forming ``T~``."""

    def __init__(self, T: DenseTensor):
        p, N = T.order, T.dim
        self.h = (p - 1) // 2
        self.side = N**self.h
        blocks = T.data.reshape(self.side, self.side, N)
        self.blocks = blocks
        self.blocks_adj = np.conj(blocks).transpose(1, 0, 2)

    def _one(self, Tr, X):
        # Y[s, ia, ja] = sum_{ib, jb, sigma} Tr[ia, ib, sigma] Tr[ja, jb, sigma] X[s, ib, jb]
        Z = np.einsum("jls,xkl->xkjs", Tr, X)
        return np.einsum("iks,xkjs->xij", Tr, Z)

    def apply(self, X: np.ndarray) -> np.ndarray:
        shape = X.shape
        Xr = X.reshape(-1, self.side, self.side)
        Y = 0.5 * (self._one(self.blocks, Xr) + self._one(self.blocks_adj, Xr))
        return Y.reshape(shape)

    def dense(self) -> np.ndarray:
        n = self.side**2
        return self.apply(np.eye(n, dtype=np.complex128)).T

    def opnorm(self) -> float:
        # ||sum_s A_s ⊗ A_s|| <= sum_s ||A_s||^2
        return float(sum(np.linalg.norm(self.blocks[:, :, s], 2) ** 2
                         for s in range(self.blocks.shape[2])))


class HamiltonianOperator:
    """Matrix-free ``H(T)`` on a fixed-particle-number basis."""

    def __init__(self, T: DenseTensor, basis: OccupationBasis, parity: str, q: int, kernel):
        self.source = T
        self.basis = basis
        self.parity = parity
        self.p = T.order
        self.q = q
        self.kernel = kernel
        self.stack = annihilation_stack(basis.N, basis.n_bos, q)
        self.low_dim = self.stack.shape[0] // basis.N**q

    @property
    def dim(self) -> int:
        return self.basis.dim

    def matvec(self, x: np.ndarray) -> np.ndarray:
        X = (self.stack @ x).reshape(self.low_dim, -1)
        Y = self.kernel.apply(X)
        return self.stack.T @ Y.ravel()

    def apply(self, psi: FockVector) -> FockVector:
        if psi.basis != self.basis:
            raise InvalidArgument(f"state basis {psi.basis!r} does not match operator basis {self.basis!r}")
        return FockVector(self.basis, self.matvec(psi.amplitudes))

    def materialize_dense(self, cap: int = DENSE_CAP, chunk: int = 256) -> np.ndarray:
        D = self.dim
        if D > cap:
            raise SizeError(f"dimension {D} exceeds dense cap {cap}")
        Nq = self.basis.N**self.q
        out = np.empty((D, D), dtype=np.complex128)
        for start in range(0, D, chunk):
            stop = min(D, start + chunk)
            cols = self.stack[:, start:stop].toarray()            # (low*Nq, m)
            m = stop - start
            X = cols.reshape(self.low_dim, Nq, m).transpose(0, 2, 1).reshape(-1, Nq)
            Y = self.kernel.apply(X.astype(np.complex128))
            Y = Y.reshape(self.low_dim, m, Nq).transpose(0, 2, 1).reshape(-1, m)
            out[:, start:stop] = self.stack.T @ Y
        return out

    @cached_property
    def norm_bound(self) -> float:
        """Rigorous bound ``n!/(n-q)! * ||M_h||`` on the operator norm."""
        n = self.basis.n_bos
        return factorial(n) / factorial(n - self.q) * self.kernel.opnorm()

    @cached_property
    def coarse_norm_bound(self) -> float:
        """Sum of absolute kernel entries times the number of ladder terms."""
        n = self.basis.n_bos
        terms = factorial(self.q) * comb(n, self.q)
        return float(np.abs(self.kernel.dense()).sum()) * terms

    # ---- on-demand matrix elements (used by the path evaluators) ----------

    @cached_property
    def _multiset_kernel(self) -> np.ndarray:
        """Kernel summed over orderings: rows/cols indexed by q-particle occupations."""
        N, q = self.basis.N, self.q
        ms_basis = get_basis(N, q)
        tuples = np.array(np.unravel_index(np.arange(N**q), (N,) * q)).T
        occ = np.zeros((N**q, N), dtype=np.int64)
        for j in range(q):
            np.add.at(occ, (np.arange(N**q), tuples[:, j]), 1)
        P = np.zeros((N**q, ms_basis.dim))
        P[np.arange(N**q), ms_basis.rank(occ)] = 1.0
        MP = self.kernel.apply(P.T.astype(np.complex128)).T   # M_h @ P
        return P.T @ MP

    def _ms_index(self, counts: Tuple[int, ...]) -> int:
        return int(get_basis(self.basis.N, self.q).rank(counts))

    def element(self, y: Tuple[int, ...], x: Tuple[int, ...]) -> complex:
        """``<y|H|x>`` from occupation arithmetic; cost independent of the basis size."""
        q = self.q
        K = self._multiset_kernel
        need = [max(0, a - b) for a, b in zip(x, y)]
        extra = q - sum(need)
        if extra < 0:
            return 0j
        avail = [a - r for a, r in zip(x, need)]
        total = 0j
        for e in _sub_multisets(avail, extra):
            c = [r + k for r, k in zip(need, e)]
            w = [a - k for a, k in zip(x, c)]
            cy = [b - m for b, m in zip(y, w)]
            coef = 1.0
            for m, k in zip(x, c):
                if k:
                    coef *= _sqrt_ff(m, k)
            for m, k in zip(y, cy):
                if k:
                    coef *= _sqrt_ff(m, k)
            total += coef * K[self._ms_index(cy), self._ms_index(c)]
        return complex(total)

    def column(self, x: Tuple[int, ...]) -> Dict[int, complex]:
        """Nonzero entries of ``H|x>`` keyed by basis index."""
        q, N = self.q, self.basis.N
        K = self._multiset_kernel
        creators = get_basis(N, q).states
        out: Dict[int, complex] = {}
        x_arr = np.asarray(x, dtype=np.int64)
        for c in _sub_multisets(list(x), q):
            c_arr = np.asarray(c, dtype=np.int64)
            w = x_arr - c_arr
            coef_a = np.prod([_sqrt_ff(m, k) for m, k in zip(x, c) if k])
            ys = w[None, :] + creators
            coef_c = np.ones(creators.shape[0])
            for mode in range(N):
                k = creators[:, mode]
                m = ys[:, mode]
                coef_c *= np.sqrt(_falling(m, k))
            vals = coef_a * coef_c * K[:, self._ms_index(tuple(c))]
            for r, v in zip(self.basis.rank(ys), vals):
                if v != 0:
                    out[int(r)] = out.get(int(r), 0j) + complex(v)
        return out


def _falling(m: np.ndarray, k: np.ndarray) -> np.ndarray:
    out = np.ones(np.shape(m))
    for j in range(int(np.max(k, initial=0))):
        out *= np.where(k > j, m - j, 1)
    return out


def _sqrt_ff(m: int, k: int) -> float:
    return sqrt(factorial(m) / factorial(m - k))


def _sub_multisets(avail, size):
    """All count vectors ``e`` with ``0 <= e <= avail`` and ``sum(e) == size``."""
    n = len(avail)
    suffix = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + avail[i]
    if suffix[0] < size:
        return
    cur = [0] * n

    def rec(i, left):
        if left == 0:
            yield tuple(cur)
            return
        if i == n or suffix[i] < left:
            return
        for k in range(min(avail[i], left), -1, -1):
            cur[i] = k
            yield from rec(i + 1, left - k)
        cur[i] = 0

    yield from rec(0, size)


def _resolve_basis(T: DenseTensor, basis) -> OccupationBasis:
    if isinstance(basis, OccupationBasis):
        if basis.N != T.dim:
            raise InvalidArgument(f"basis has N={basis.N} but tensor has dimension {T.dim}")
        return basis
    return get_basis(T.dim, int(basis))


def build_even(T, basis) -> HamiltonianOperator:
    """``H(T)`` for even order; ``basis`` is an OccupationBasis or a particle number."""
    T = as_tensor(T)
    p = T.order
    if p % 2:
        raise InvalidArgument("build_even needs an even-order tensor")
    basis = _resolve_basis(T, basis)
    q = p // 2
    if basis.n_bos < q:
        raise DegenerateOperatorError(f"n_bos={basis.n_bos} < p/2={q}: the operator vanishes")
    N = T.dim
    kernel = _DenseKernel(T.data.reshape(N**q, N**q))
    return HamiltonianOperator(T, basis, "even", q, kernel)


def build_odd(T, basis, tilde_cap: int = TILDE_CAP) -> HamiltonianOperator:
    """``H(T)`` for odd order via the derived even-order tensor."""
    T = as_tensor(T)
    p = T.order
    if p % 2 == 0:
        raise InvalidArgument("build_odd needs an odd-order tensor")
    basis = _resolve_basis(T, basis)
    q = p - 1
    if basis.n_bos < q:
        raise DegenerateOperatorError(f"n_bos={basis.n_bos} < p-1={q}: the operator vanishes")
    N = T.dim
    if N ** (2 * q) <= tilde_cap:
        kernel = _DenseKernel(tilde_tensor(T).data.reshape(N**q, N**q))
    else:
        kernel = _ContractedOddKernel(T)
    return HamiltonianOperator(T, basis, "odd", q, kernel)


def build_hamiltonian(T, basis) -> HamiltonianOperator:
    T = as_tensor(T)
    return build_even(T, basis) if T.order % 2 == 0 else build_odd(T, basis)


def apply(H: HamiltonianOperator, psi: FockVector) -> FockVector:
    return H.apply(psi)


def materialize_dense(H: HamiltonianOperator, cap: int = DENSE_CAP) -> np.ndarray:
    return H.materialize_dense(cap)


def quantum_expectation(H, psi: FockVector) -> float:
    """``<psi|H|psi>`` for a normalized state."""
    require_normalized(psi)
    if isinstance(H, HamiltonianOperator):
        Hpsi = H.apply(psi).amplitudes
    else:
        Hpsi = np.asarray(H) @ psi.amplitudes
    return float(np.real(np.vdot(psi.amplitudes, Hpsi)))


def leg_permutations(p: int):
    """Permutations applied to both halves of an even-order tensor's legs."""
    q = p // 2
    for perm in permutations(range(q)):
        yield tuple(perm) + tuple(q + i for i in perm)
