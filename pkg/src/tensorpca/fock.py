"""Occupation-number basis of the symmetric subspace and bosonic operators.

Modes are numbered ``0 .. N-1``.  Basis states of ``n`` bosons in ``N`` modes
are occupation vectors listed in lexicographically descending order, e.g. for
``N=3, n=2``: (2,0,0), (1,1,0), (1,0,1), (0,2,0), (0,1,1), (0,0,2).
Positions are computed by combinatorial ranking, so no hash table is needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from math import comb, factorial, sqrt
from typing import Iterable, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.special import gammaln

from .errors import ContractViolation, InvalidArgument, SizeError
from .tensors import as_tensor

MAX_BASIS = 5 * 10**7
NORM_TOL = 1e-8


def fock_dimension(N: int, n_bos: int) -> int:
    """Exact number of ways to place ``n_bos`` bosons in ``N`` modes."""
    if N < 1 or n_bos < 0:
        raise InvalidArgument(f"need N >= 1 and n_bos >= 0 (got N={N}, n_bos={n_bos})")
    return comb(N + n_bos - 1, n_bos)


def _count_table(N: int, n: int) -> np.ndarray:
    # table[J + 1, r] = number of ways to put J bosons into r modes (0 if J < 0)
    table = np.zeros((n + 2, N + 1), dtype=np.int64)
    for J in range(n + 1):
        for r in range(1, N + 1):
            table[J + 1, r] = comb(J + r - 1, r - 1)
    return table


def _enumerate_states(N: int, n: int) -> np.ndarray:
    if N == 1:
        return np.array([[n]], dtype=np.int64)
    blocks = []
    for k in range(n, -1, -1):
        rest = _enumerate_states(N - 1, n - k)
        blocks.append(np.hstack([np.full((rest.shape[0], 1), k, dtype=np.int64), rest]))
    return np.vstack(blocks)


class OccupationBasis:
    """Fixed-particle-number basis with ranking and unranking."""

    def __init__(self, N: int, n_bos: int):
        D = fock_dimension(N, n_bos)
        if D > MAX_BASIS:
            raise SizeError(f"basis dimension {D} exceeds cap {MAX_BASIS}")
        self.N = int(N)
        self.n_bos = int(n_bos)
        self.dim = int(D)
        self._table = _count_table(self.N, self.n_bos)
        self._states = None

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other) -> bool:
        return isinstance(other, OccupationBasis) and (self.N, self.n_bos) == (other.N, other.n_bos)

    def __hash__(self) -> int:
        return hash((self.N, self.n_bos))

    def __repr__(self) -> str:
        return f"OccupationBasis(N={self.N}, n_bos={self.n_bos}, dim={self.dim})"

    @property
    def states(self) -> np.ndarray:
        """All occupation vectors as a read-only ``(D, N)`` integer array."""
        if self._states is None:
            s = _enumerate_states(self.N, self.n_bos)
            s.setflags(write=False)
            self._states = s
        return self._states

    def rank(self, occ) -> np.ndarray:
        """Position of one or many occupation vectors (last axis = modes)."""
        occ = np.asarray(occ, dtype=np.int64)
        if occ.shape[-1] != self.N:
            raise InvalidArgument("occupation vector length does not match N")
        remaining = self.n_bos - np.cumsum(occ, axis=-1) + occ
        r = np.arange(self.N, 0, -1)
        J = remaining - occ - 1
        terms = self._table[np.clip(J, -1, self.n_bos) + 1, r]
        return terms[..., :-1].sum(axis=-1)

    def index(self, occ: Sequence[int]) -> int:
        occ = tuple(int(x) for x in occ)
        if len(occ) != self.N or min(occ) < 0 or sum(occ) != self.n_bos:
            raise InvalidArgument(f"{occ} is not a state of {self!r}")
        return int(self.rank(occ))

    def unrank(self, idx: int) -> Tuple[int, ...]:
        """Occupation vector at position ``idx`` without enumerating the basis."""
        if not 0 <= idx < self.dim:
            raise InvalidArgument(f"index {idx} out of range for dimension {self.dim}")
        occ = []
        m = self.n_bos
        for i in range(self.N - 1):
            modes_left = self.N - i - 1
            for k in range(m, -1, -1):
                block = int(self._table[m - k + 1, modes_left])
                if idx < block:
                    occ.append(k)
                    m -= k
                    break
                idx -= block
        occ.append(m)
        return tuple(occ)


def enumerate_basis(N: int, n_bos: int) -> OccupationBasis:
    basis = get_basis(N, n_bos)
    basis.states  # noqa: B018 - force enumeration
    return basis


@lru_cache(maxsize=64)
def get_basis(N: int, n_bos: int) -> OccupationBasis:
    return OccupationBasis(N, n_bos)


@dataclass(frozen=True, eq=False)
class FockVector:
    basis: OccupationBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.basis.dim,):
            raise InvalidArgument(f"amplitude array of shape {amps.shape} does not match {self.basis!r}")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @property
    def is_normalized(self) -> bool:
        return abs(self.norm() - 1.0) <= 1e-10

    def normalized(self) -> "FockVector":
        nrm = self.norm()
        if nrm == 0:
            raise InvalidArgument("cannot normalize the zero vector")
        return FockVector(self.basis, self.amplitudes / nrm)

    def inner(self, other: "FockVector") -> complex:
        """``<self|other>``."""
        _same_basis(self.basis, other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __add__(self, other: "FockVector") -> "FockVector":
        _same_basis(self.basis, other.basis)
        return FockVector(self.basis, self.amplitudes + other.amplitudes)

    def __mul__(self, scalar) -> "FockVector":
        return FockVector(self.basis, self.amplitudes * scalar)

    __rmul__ = __mul__


def basis_state(basis: OccupationBasis, occ) -> FockVector:
    amps = np.zeros(basis.dim, dtype=np.complex128)
    amps[basis.index(occ)] = 1.0
    return FockVector(basis, amps)


def _same_basis(a: OccupationBasis, b: OccupationBasis) -> None:
    if a != b:
        raise InvalidArgument(f"basis mismatch: {a!r} vs {b!r}")


def require_normalized(state: FockVector, what: str = "state") -> None:
    if abs(state.norm() - 1.0) > NORM_TOL:
        raise ContractViolation(f"{what} must be normalized (norm {state.norm():.3g})")


def _log_multiplicity(occ: np.ndarray, n: int) -> np.ndarray:
    return gammaln(n + 1) - gammaln(np.asarray(occ) + 1.0).sum(axis=-1)


# ---- operators -------------------------------------------------------------

def apply_monomial(ops: Iterable[Tuple[str, int]], state: FockVector, result_basis=None) -> FockVector:
    """Apply a product of ladder operators.

    ``ops`` is written left to right as in the operator product, so the last
    entry acts first.  Each entry is ``("create", mu)`` or ``("annihilate", mu)``.
    The result lives in the basis with the shifted particle number; passing a
    ``result_basis`` with a different particle number is a contract violation.
    """
    ops = list(ops)
    basis = state.basis
    net = 0
    for kind, mu in ops:
        if kind not in ("create", "annihilate"):
            raise InvalidArgument(f"unknown ladder operator {kind!r}")
        if not 0 <= mu < basis.N:
            raise InvalidArgument(f"mode {mu} out of range")
        net += 1 if kind == "create" else -1
    target_n = basis.n_bos + net
    if result_basis is not None and result_basis.n_bos != target_n:
        raise ContractViolation(
            f"monomial changes particle number by {net}; cannot map into n_bos={result_basis.n_bos}")
    if target_n < 0:
        raise ContractViolation("monomial removes more particles than the state holds")
    out_basis = result_basis if result_basis is not None else get_basis(basis.N, target_n)

    occ = basis.states.copy()
    coef = np.ones(basis.dim)
    for kind, mu in reversed(ops):
        if kind == "annihilate":
            coef *= np.sqrt(np.maximum(occ[:, mu], 0))
            occ[:, mu] -= 1
        else:
            coef *= np.sqrt(np.maximum(occ[:, mu] + 1, 0))
            occ[:, mu] += 1
    keep = coef != 0
    out = np.zeros(out_basis.dim, dtype=np.complex128)
    if np.any(keep):
        np.add.at(out, out_basis.rank(occ[keep]), coef[keep] * state.amplitudes[keep])
    return FockVector(out_basis, out)


def _sqrt_falling_table(n: int, q: int) -> np.ndarray:
    # t[m, k] = sqrt(m! / (m-k)!) for k <= m, 0 otherwise
    t = np.zeros((n + 1, q + 1))
    for m in range(n + 1):
        for k in range(min(m, q) + 1):
            t[m, k] = sqrt(factorial(m) / factorial(m - k))
    return t


@lru_cache(maxsize=32)
def annihilation_stack(N: int, n_bos: int, q: int) -> sparse.csr_matrix:
    """Sparse map ``psi -> (a_{nu_1} ... a_{nu_q} psi)`` for all ordered ``nu``.

    Shape is ``(D_low * N**q, D)`` with row ``s * N**q + flat(nu)`` where ``s``
    indexes the ``(n_bos - q)``-particle basis.  Stacking every ordered tuple
    makes ``B^H B = n!/(n-q)!`` times the identity.
    """
    if q > n_bos:
        raise InvalidArgument("cannot remove more particles than present")
    basis = get_basis(N, n_bos)
    low = get_basis(N, n_bos - q)
    tuples = np.array(list(product(range(N), repeat=q)), dtype=np.int64).reshape(-1, q)
    counts = np.zeros((tuples.shape[0], N), dtype=np.int64)
    for j in range(q):
        np.add.at(counts, (np.arange(tuples.shape[0]), tuples[:, j]), 1)
    table = _sqrt_falling_table(n_bos, q)
    occ = basis.states
    Nq = N**q
    rows, cols, vals = [], [], []
    chunk = max(1, 2_000_000 // max(1, basis.dim * N))
    for start in range(0, tuples.shape[0], chunk):
        k = counts[start:start + chunk]
        new = occ[None, :, :] - k[:, None, :]
        valid = np.all(new >= 0, axis=2)
        t_idx, s_idx = np.nonzero(valid)
        if t_idx.size == 0:
            continue
        kv = k[t_idx]
        ov = occ[s_idx]
        coef = np.prod(table[ov, kv], axis=1)
        rows.append(low.rank(new[t_idx, s_idx]) * Nq + start + t_idx)
        cols.append(s_idx)
        vals.append(coef)
    if rows:
        rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    mat = sparse.csr_matrix((vals, (rows, cols)), shape=(low.dim * Nq, basis.dim))
    return mat


def product_state(v, n_bos: int) -> FockVector:
    """Normalized symmetric state ``|v/|v|>^{⊗ n_bos}`` in the occupation basis."""
    v = np.asarray(v, dtype=np.complex128).ravel()
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise InvalidArgument("product_state of the zero vector")
    basis = get_basis(v.size, n_bos)
    occ = basis.states
    vhat = v / nrm
    mult = np.exp(0.5 * _log_multiplicity(occ, n_bos))
    amps = mult * np.prod(vhat[None, :] ** occ, axis=1)
    return FockVector(basis, amps)


def _occupations_of_flat(flat: np.ndarray, N: int, n: int) -> np.ndarray:
    counts = np.zeros((flat.size, N), dtype=np.int64)
    rows = np.arange(flat.size)
    rem = flat.copy()
    for _ in range(n):
        rem, digit = np.divmod(rem, N)
        counts[rows, digit] += 1
    return counts


def tensor_to_fock(T) -> Tuple[FockVector, float]:
    """Project ``|T>`` onto the symmetric subspace, in occupation coordinates.

    Returns the (unnormalized) projected vector and its norm.  The amplitude of
    occupation ``o`` is ``sum of entries with occupation o / sqrt(mult(o))``.
    """
    T = as_tensor(T)
    N, n = T.dim, T.order
    basis = get_basis(N, n)
    flat = T.data.ravel()
    re = np.zeros(basis.dim)
    im = np.zeros(basis.dim)
    chunk = 1 << 20
    for start in range(0, flat.size, chunk):
        idx = np.arange(start, min(start + chunk, flat.size), dtype=np.int64)
        ranks = basis.rank(_occupations_of_flat(idx, N, n))
        vals = flat[start:start + idx.size]
        re += np.bincount(ranks, weights=vals.real, minlength=basis.dim)
        im += np.bincount(ranks, weights=vals.imag, minlength=basis.dim)
    amps = (re + 1j * im) * np.exp(-0.5 * _log_multiplicity(basis.states, n))
    vec = FockVector(basis, amps)
    return vec, vec.norm()


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.ascontiguousarray(self.matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidArgument("density matrix must be square")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def expectation(self, v) -> float:
        v = np.asarray(v, dtype=np.complex128)
        return float(np.real(np.vdot(v, self.matrix @ v)))


def single_particle_density_matrix(state: FockVector) -> DensityMatrix:
    """``rho[mu, nu] = <a+_mu a_nu> / n_bos`` in the given normalized state."""
    require_normalized(state)
    basis = state.basis
    if basis.n_bos < 1:
        raise InvalidArgument("need at least one particle")
    B = annihilation_stack(basis.N, basis.n_bos, 1)
    lowered = (B @ state.amplitudes).reshape(-1, basis.N)
    rho = lowered.conj().T @ lowered / basis.n_bos
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho)
