"""Amplitudes <y|C|x> of products of number-conserving gates in small memory.

Two evaluators are provided.  :func:`amplitude_naive` walks every path of
intermediate basis states depth-first.  :func:`amplitude_recursive` splits the
circuit in half and sums over the state in the middle,

    <y|C|x> = sum_z <y|C_top|z> <z|C_bottom|x>,

recursing on both halves, so only one occupation vector per recursion level
is alive at any time.  Both use compensated summation and ask each gate for
matrix elements on demand; neither ever holds a D x D matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log, sqrt
from typing import Dict, List, Tuple

import numpy as np

from .errors import DegenerateStartError, InvalidArgument
from .fock import OccupationBasis, fock_dimension
from .hamiltonian import HamiltonianOperator, build_hamiltonian
from .spectral import thresholds
from .tensors import as_tensor

Occ = Tuple[int, ...]


class CompensatedSum:
    """Neumaier-compensated running sum of complex numbers."""

    __slots__ = ("re", "re_c", "im", "im_c")

    def __init__(self):
        self.re = self.re_c = self.im = self.im_c = 0.0

    @staticmethod
    def _step(s, c, v):
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        return t, c

    def add(self, value: complex) -> None:
        self.re, self.re_c = self._step(self.re, self.re_c, value.real)
        self.im, self.im_c = self._step(self.im, self.im_c, value.imag)

    @property
    def value(self) -> complex:
        return complex(self.re + self.re_c, self.im + self.im_c)


# ---- gates -------------------------------------------------------------------

class HamiltonianGate:
    def __init__(self, H: HamiltonianOperator):
        self.H = H

    def element(self, y: Occ, x: Occ) -> complex:
        return self.H.element(y, x)

    def column(self, x: Occ, basis: OccupationBasis) -> Dict[int, complex]:
        return self.H.column(x)

    def dense(self) -> np.ndarray:
        return self.H.materialize_dense()

    def __repr__(self):
        return f"HamiltonianGate(p={self.H.p})"


@dataclass(frozen=True)
class HoppingGate:
    """``a+_mu a_nu``."""

    mu: int
    nu: int

    def _target(self, x: Occ):
        if x[self.nu] == 0:
            return None, 0.0
        y = list(x)
        coef = sqrt(y[self.nu])
        y[self.nu] -= 1
        coef *= sqrt(y[self.mu] + 1)
        y[self.mu] += 1
        return tuple(y), coef

    def element(self, y: Occ, x: Occ) -> complex:
        target, coef = self._target(x)
        return complex(coef) if target == tuple(y) else 0j

    def column(self, x: Occ, basis: OccupationBasis) -> Dict[int, complex]:
        target, coef = self._target(x)
        return {} if target is None else {basis.index(target): complex(coef)}

    def dense_on(self, basis: OccupationBasis) -> np.ndarray:
        M = np.zeros((basis.dim, basis.dim), dtype=np.complex128)
        for j, x in enumerate(basis.states):
            target, coef = self._target(tuple(int(v) for v in x))
            if target is not None:
                M[basis.index(target), j] += coef
        return M


@dataclass(frozen=True)
class IdentityGate:
    def element(self, y: Occ, x: Occ) -> complex:
        return 1 + 0j if tuple(y) == tuple(x) else 0j

    def column(self, x: Occ, basis: OccupationBasis) -> Dict[int, complex]:
        return {basis.index(x): 1 + 0j}

    def dense_on(self, basis: OccupationBasis) -> np.ndarray:
        return np.eye(basis.dim, dtype=np.complex128)


@dataclass
class GeneratorCircuit:
    """Gates in application order: ``gates[0]`` acts first."""

    gates: List
    basis: OccupationBasis

    def __post_init__(self):
        if not self.gates:
            raise InvalidArgument("a circuit needs at least one gate")
        for g in self.gates:
            if isinstance(g, HamiltonianGate) and g.H.basis != self.basis:
                raise InvalidArgument("Hamiltonian gate acts on a different basis")

    @property
    def depth(self) -> int:
        return len(self.gates)

    def dense(self) -> np.ndarray:
        """Dense product, for checking the evaluators on small bases."""
        out = np.eye(self.basis.dim, dtype=np.complex128)
        for g in self.gates:
            mat = g.dense() if isinstance(g, HamiltonianGate) else g.dense_on(self.basis)
            out = mat @ out
        return out


@dataclass
class PathStats:
    calls: int = 0
    base_calls: int = 0
    live_frames: int = 0
    max_live_frames: int = 0
    paths: int = 0


def _occ(basis: OccupationBasis, idx) -> Occ:
    if isinstance(idx, (int, np.integer)):
        return basis.unrank(int(idx))
    occ = tuple(int(v) for v in idx)
    basis.index(occ)  # validates
    return occ


def amplitude_naive(circuit: GeneratorCircuit, x, y, stats: PathStats = None) -> complex:
    """Depth-first sum over all paths of intermediate states."""
    basis = circuit.basis
    x, y = _occ(basis, x), _occ(basis, y)
    y_idx = basis.index(y)
    gates = circuit.gates
    acc = CompensatedSum()
    stats = stats if stats is not None else PathStats()

    def walk(level: int, state: Occ, weight: complex):
        if level == len(gates) - 1:
            val = gates[level].element(y, state)
            if val != 0:
                stats.paths += 1
                acc.add(weight * val)
            return
        for z_idx, val in gates[level].column(state, basis).items():
            if val != 0 and z_idx is not None:
                walk(level + 1, basis.unrank(z_idx), weight * val)

    walk(0, x, 1 + 0j)
    return acc.value


def amplitude_recursive(circuit: GeneratorCircuit, x, y, stats: PathStats = None) -> complex:
    """Depth-halving evaluation of ``<y|C|x>``.

    ``stats`` (optional) collects the number of calls, base-case calls and the
    largest number of simultaneously open frames.
    """
    basis = circuit.basis
    x, y = _occ(basis, x), _occ(basis, y)
    stats = stats if stats is not None else PathStats()
    gates = circuit.gates
    D = basis.dim

    def amp(lo: int, hi: int, src: Occ, dst: Occ) -> complex:
        stats.calls += 1
        stats.live_frames += 1
        stats.max_live_frames = max(stats.max_live_frames, stats.live_frames)
        try:
            if hi - lo == 1:
                stats.base_calls += 1
                return gates[lo].element(dst, src)
            mid = lo + (hi - lo + 1) // 2
            acc = CompensatedSum()
            for z_idx in range(D):
                z = basis.unrank(z_idx)
                bottom = amp(lo, mid, src, z)
                if bottom == 0:
                    continue
                top = amp(mid, hi, z, dst)
                if top != 0:
                    acc.add(bottom * top)
            return acc.value
        finally:
            stats.live_frames -= 1

    return amp(0, len(gates), x, y)


def frame_bound(depth: int) -> int:
    return ceil(log(depth, 2)) + 1 if depth > 1 else 1


def call_bound(depth: int, D: int) -> int:
    """``(2D)^ceil(log2 depth)``; bounds the number of base-case evaluations."""
    return (2 * D) ** (ceil(log(depth, 2)) if depth > 1 else 0)


def default_power(p: int, N: int, n_bos: int, lambda_bar: float, ensemble=None) -> int:
    """Power ``ceil(ln D / ln(E0/Emax))`` needed to separate planted from null."""
    th = thresholds(p, N, n_bos, lambda_bar, ensemble)
    if th.E0 <= th.Emax:
        raise InvalidArgument("default power needs E0 > Emax")
    D = fock_dimension(N, n_bos)
    return max(1, ceil(log(D) / log(th.E0 / th.Emax)))


def powered_density_entry(t0, m: int, mu: int, nu: int, x, n_bos: int = None,
                          H: HamiltonianOperator = None, stats: PathStats = None) -> complex:
    """``<x|H^m a+_mu a_nu H^m|x> / <x|H^{2m}|x>`` via :func:`amplitude_recursive`."""
    if m < 1:
        raise InvalidArgument("m must be at least 1")
    if H is None:
        if n_bos is None:
            raise InvalidArgument("pass n_bos or a prebuilt Hamiltonian")
        H = build_hamiltonian(as_tensor(t0), n_bos)
    basis = H.basis
    hg = HamiltonianGate(H)
    num = GeneratorCircuit([hg] * m + [HoppingGate(mu, nu)] + [hg] * m, basis)
    den = GeneratorCircuit([hg] * (2 * m), basis)
    d = amplitude_recursive(den, x, x, stats)
    if d == 0:
        raise DegenerateStartError("start state has zero weight under H^(2m)")
    return amplitude_recursive(num, x, x, stats) / d
