"""Desk-scale emulation of the quantum detection/recovery algorithms.

Phase estimation is modelled by its effect on each eigenvector of ``H(T0)``:
eigenvector ``i`` survives the projection with probability ``q_i``, a
smoothed step in the eigenvalue.  Circuit costs only enter the analytic cost
model at the bottom of the module.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import asin, ceil, comb, log, log2, pi, sqrt
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import eigh
from scipy.special import erf, erfinv

from .errors import InvalidArgument
from .fock import FockVector, product_state, require_normalized, tensor_to_fock
from .hamiltonian import HamiltonianOperator
from .spectral import SpectralThresholds, thresholds
from .tensors import (MAX_ENTRIES, DenseTensor, Ensemble, SignalVector, SpikedInstance, as_tensor,
                      sample_gaussian_tensor)

MAXIMALLY_MIXED = "maximally-mixed"
WINDOWS = ("hard", "erf")
VARIANTS = ("classical-power", "quantum-unamplified", "quantum-amplified", "quantum-chosen-input")


# ---- phase-estimation window ----------------------------------------------------

@dataclass
class PhaseEstimationModel:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    q: np.ndarray
    center: float
    width: float
    epsilon: float
    window: str
    thresholds: SpectralThresholds

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def window_value(self, lam) -> np.ndarray:
        return _window(np.asarray(lam, dtype=float), self.center, self.width)


def _window(lam: np.ndarray, center: float, width: float) -> np.ndarray:
    if width <= 0:
        return (lam > center).astype(float)
    return 0.5 * (1.0 + erf((lam - center) / width))


def pe_model(H, th: SpectralThresholds, epsilon: float = 0.01, window: str = "erf",
             center: Optional[float] = None) -> PhaseEstimationModel:
    """Per-eigenvector pass probabilities of an idealized phase estimation.

    The erf profile is centered at ``(E0 + Ecut)/2`` with width
    ``(E0 - Ecut)/4``, narrowed if needed so that eigenvalues below ``Ecut``
    pass with probability at most ``epsilon`` and those above
    ``7/8 E0 + 1/8 Emax`` with probability at least ``1 - epsilon``.
    """
    if not 0 < epsilon < 0.5:
        raise InvalidArgument("epsilon must lie in (0, 1/2)")
    if window not in WINDOWS:
        raise InvalidArgument(f"window must be one of {WINDOWS}")
    M = H.materialize_dense() if isinstance(H, HamiltonianOperator) else np.asarray(H, dtype=np.complex128)
    w, V = eigh(M)
    c = (th.E0 + th.Ecut) / 2 if center is None else float(center)
    width = 0.0
    if window == "erf" and th.E0 > th.Emax:
        gap = th.E0 - th.Emax
        width = min((th.E0 - th.Ecut) / 4, (gap / 8) / float(erfinv(1 - 2 * epsilon)))
    q = np.clip(_window(w, c, width), 0.0, 1.0)
    return PhaseEstimationModel(w, V, q, c, width, epsilon, window, th)


def _input_weights(model: PhaseEstimationModel, inp) -> np.ndarray:
    """Weights ``<v_i|rho|v_i>`` of the input on the eigenbasis."""
    if isinstance(inp, str):
        if inp != MAXIMALLY_MIXED:
            raise InvalidArgument(f"unknown input marker {inp!r}")
        return np.full(model.dim, 1.0 / model.dim)
    if isinstance(inp, ChosenInput):
        return inp.weight * _input_weights(model, inp.state if inp.density is None else inp.density)
    if isinstance(inp, FockVector):
        require_normalized(inp)
        return np.abs(model.eigenvectors.conj().T @ inp.amplitudes) ** 2
    rho = np.asarray(inp, dtype=np.complex128)
    if rho.shape != (model.dim, model.dim):
        raise InvalidArgument("density matrix has the wrong shape")
    return np.real(np.einsum("ji,jk,ki->i", model.eigenvectors.conj(), rho, model.eigenvectors))


def success_probability(model: PhaseEstimationModel, inp) -> float:
    """Probability that the window projection accepts ``inp``.

    ``inp`` is a normalized :class:`FockVector`, a density matrix, the
    :data:`MAXIMALLY_MIXED` marker, or a :class:`ChosenInput` (whose
    symmetric-subspace projection weight multiplies the result).
    """
    return float(np.clip(np.dot(model.q, _input_weights(model, inp)), 0.0, 1.0))


def post_selected_state(model: PhaseEstimationModel, state: FockVector) -> FockVector:
    """Normalized state after a successful window projection."""
    require_normalized(state)
    coeffs = model.eigenvectors.conj().T @ state.amplitudes
    out = model.eigenvectors @ (np.sqrt(model.q) * coeffs)
    nrm = np.linalg.norm(out)
    if nrm == 0:
        raise InvalidArgument("projection succeeds with probability zero")
    return FockVector(state.basis, out / nrm)


def sample_projection_outcomes(model: PhaseEstimationModel, state: FockVector, draws: int, seed=None) -> int:
    """Simulate projective runs: pick an eigenvector by Born's rule, then pass with ``q_i``."""
    weights = _input_weights(model, state)
    weights = weights / weights.sum()
    rng = np.random.default_rng(seed)
    picks = rng.choice(model.dim, size=draws, p=weights)
    return int(np.sum(rng.random(draws) < model.q[picks]))


# ---- input states ------------------------------------------------------------------

@dataclass
class ChosenInput:
    """Input built from copies of the observed tensor.

    ``state`` is the normalized symmetric projection (``None`` when padding
    made the input mixed, in which case ``density`` holds it).  ``weight`` is
    the squared norm kept by the projection.  ``signal_overlap`` is the squared
    overlap of the unprojected input with the normalized ``v^{⊗n_bos}``;
    ``projected_overlap`` is the same overlap after projecting.
    """

    state: Optional[FockVector]
    weight: float
    signal_overlap: Optional[float] = None
    projected_overlap: Optional[float] = None
    approximate: bool = False
    density: Optional[np.ndarray] = field(default=None, repr=False)


def _tensor_power(T: DenseTensor, k: int) -> np.ndarray:
    if T.dim ** (T.order * k) > MAX_ENTRIES:
        raise InvalidArgument("product tensor exceeds the dense cap")
    out = np.ones((), dtype=np.complex128)
    for _ in range(k):
        out = np.multiply.outer(out, T.data)
    return out


def prepare_chosen_input(t0, n_bos: int, signal=None, pad: bool = False) -> ChosenInput:
    """Symmetric projection of ``|T0>^{⊗ n_bos/p}``.

    When ``p`` does not divide ``n_bos`` and ``pad`` is set, the remaining
    modes are filled with a maximally mixed factor and a density matrix is
    returned, flagged approximate.
    """
    if signal is None and isinstance(t0, SpikedInstance):
        signal = t0.signal
    T = as_tensor(t0)
    p, N = T.order, T.dim
    k, r = divmod(n_bos, p)
    if r and not pad:
        raise InvalidArgument(f"n_bos={n_bos} is not a multiple of p={p}; pass pad=True")
    if k == 0:
        raise InvalidArgument("n_bos must be at least p")
    base = _tensor_power(T, k)
    full_sq = T.norm() ** (2 * k)
    v = None
    if signal is not None:
        v = signal.vector if isinstance(signal, SignalVector) else np.asarray(signal, dtype=float)
    if not r:
        proj, nrm = tensor_to_fock(base)
        state = proj * (1.0 / nrm)
        overlap = projected = None
        if v is not None:
            sig = product_state(v, n_bos)
            projected = float(abs(sig.inner(state)) ** 2)
            overlap = projected * nrm**2 / full_sq
        return ChosenInput(state, float(nrm**2 / full_sq), overlap, projected)
    if N ** (p * k + r) > MAX_ENTRIES:
        raise InvalidArgument("padded input exceeds the dense cap")
    cols = []
    for j in range(N**r):
        e = np.zeros(N**r)
        e[j] = 1.0
        vec, _ = tensor_to_fock(np.multiply.outer(base, e.reshape((N,) * r)))
        cols.append(vec.amplitudes)
    A = np.stack(cols, axis=1)
    rho = A @ A.conj().T / N**r
    tr = float(np.real(np.trace(rho)))
    rho /= tr
    overlap = projected = None
    if v is not None:
        sig = product_state(v, n_bos).amplitudes
        projected = float(np.real(np.vdot(sig, rho @ sig)))
        overlap = projected * tr / full_sq
    return ChosenInput(None, tr / full_sq, overlap, projected, approximate=True, density=rho)


@dataclass(frozen=True)
class PerturbationParams:
    x: float
    y: float
    x_prime: float


def sample_perturbation_params(N: int, seed=None) -> PerturbationParams:
    """Defaults: ``x = 1/ln N``, ``x'^2`` uniform on ``[0, x^2]``, ``y`` uniform on ``[0, 1]``."""
    rng = np.random.default_rng(seed)
    x = 1.0 / log(N)
    return PerturbationParams(x, float(rng.random()), float(sqrt(rng.random()) * x))


def perturbed_tensor(t0, x: float, y: float, x_prime: float, seed=None) -> DenseTensor:
    """Tensor whose copies make up the perturbed input.

    With ``Delta`` and ``delta'`` fresh Gaussians (``delta'`` scaled by
    ``x_prime``), returns ``T0 + y x Delta + x (1-y)/sqrt(1+x^2) delta'``.
    Only ``T0`` and the fresh noise are used, never the signal.
    """
    if x < 0 or x_prime < 0 or not 0 <= y <= 1:
        raise InvalidArgument("need x, x' >= 0 and y in [0, 1]")
    T = as_tensor(t0)
    if x == 0:
        return T
    ens = Ensemble("real" if T.real else "complex", T.symmetric)
    s_delta, s_prime = np.random.SeedSequence(seed).spawn(2)
    Delta = sample_gaussian_tensor(T.order, T.dim, ens, s_delta)
    dprime = sample_gaussian_tensor(T.order, T.dim, ens, s_prime)
    b = x * (1 - y) / sqrt(1 + x * x)
    return T + Delta.scaled(y * x) + dprime.scaled(b * x_prime)


def perturbed_input(t0, n_bos: int, x: float, y: float, x_prime: float, seed=None,
                    signal=None, pad: bool = False) -> ChosenInput:
    if signal is None and isinstance(t0, SpikedInstance):
        signal = t0.signal
    return prepare_chosen_input(perturbed_tensor(t0, x, y, x_prime, seed), n_bos, signal, pad)


# ---- amplification and cost model --------------------------------------------------

def amplification_iterations(p_success: float) -> int:
    if not 0 < p_success <= 1:
        raise InvalidArgument("success probability must lie in (0, 1]")
    if p_success >= 0.5:
        return 1
    return int(ceil(pi / (4 * asin(sqrt(p_success)))))


@dataclass
class CostRecord:
    variant: str
    success_probability: float
    oracle_calls: float
    state_prep_cost: float
    expected_total_cost: float
    repetitions: float


def runtime_model(variant: str, p: int, N: int, n_bos: int, lambda_bar: float, ensemble=None,
                  epsilon: float = 0.01) -> CostRecord:
    """Cost of one detection run in Hamiltonian-application units.

    * classical power iteration: ``D * ceil(ln D / ln(E0/Emax))``;
    * phase estimation: ``(2^s - 1) * |H| / (E0 - Emax)`` oracle calls with
      ``s = ceil(log2(|H| / (E0 - Emax)))`` bits and ``|H| = E0 + Emax``;
    * maximally entangled input: success ``1/D``, preparation ``n_bos``;
    * chosen input: success ``lambda^{2 n_bos/p} * c/(2(1+c))`` with
      ``c = E0/Emax - 1``, preparation ``N^p`` to load the tensor.
    """
    if variant not in VARIANTS:
        raise InvalidArgument(f"variant must be one of {VARIANTS}")
    th = thresholds(p, N, n_bos, lambda_bar, ensemble)
    if th.E0 <= th.Emax:
        raise InvalidArgument("cost model needs E0 > Emax")
    D = float(comb(N + n_bos - 1, n_bos))
    if variant == "classical-power":
        iters = ceil(log(D) / log(th.E0 / th.Emax))
        return CostRecord(variant, 1.0, D * iters, 0.0, D * iters, 1.0)
    norm = th.E0 + th.Emax
    gap = th.E0 - th.Emax
    s = max(1, ceil(log2(norm / gap)))
    pe = (2**s - 1) * norm / gap
    if variant == "quantum-chosen-input":
        c = th.E0 / th.Emax - 1
        lam = lambda_bar
        p_succ = min(1.0, lam ** (2 * n_bos / p) * 0.5 * c / (1 + c))
        prep = float(N**p)
        reps = amplification_iterations(p_succ)
    else:
        p_succ = 1.0 / D
        prep = float(n_bos)
        reps = amplification_iterations(p_succ) if variant == "quantum-amplified" else 1.0 / p_succ
    return CostRecord(variant, p_succ, pe, prep, (prep + pe) * reps, float(reps))


def minimal_nbos(p: int, N: int, lambda_bar: float, ratio: float = 2.0, ensemble=None,
                 limit: int = 200) -> int:
    """Smallest ``n_bos`` (respecting the parity floor) with ``E0 >= ratio * Emax``."""
    start = p // 2 if p % 2 == 0 else p - 1
    for n in range(start, limit + 1):
        th = thresholds(p, N, n, lambda_bar, ensemble)
        if th.E0 >= ratio * th.Emax:
            return n
    raise InvalidArgument(f"no n_bos <= {limit} reaches E0 >= {ratio} Emax")


@dataclass
class SpeedupRow:
    N: int
    n_bos: int
    lambda_: float
    log_classical: float
    log_amplified: float
    log_chosen: float

    @property
    def amplified_ratio(self) -> float:
        return self.log_amplified / self.log_classical

    @property
    def chosen_ratio(self) -> float:
        return self.log_chosen / self.log_classical


def speedup_sweep(p: int, Ns: Sequence[int], C: float = 1.0, n_bos=None, ratio: float = 2.0,
                  ensemble=None) -> List[SpeedupRow]:
    """Cost-model sweep at fixed ``C = lambda * N^{p/4}``.

    ``n_bos`` may be a fixed integer, a per-N list, or ``None`` to use the
    smallest value reaching ``E0 >= ratio * Emax``.
    """
    rows = []
    for i, N in enumerate(Ns):
        lam = C * N ** (-p / 4)
        if n_bos is None:
            n = minimal_nbos(p, N, lam, ratio, ensemble)
        elif isinstance(n_bos, int):
            n = n_bos
        else:
            n = n_bos[i]
        costs = {v: runtime_model(v, p, N, n, lam, ensemble) for v in
                 ("classical-power", "quantum-amplified", "quantum-chosen-input")}
        rows.append(SpeedupRow(N, n, lam, log(costs["classical-power"].expected_total_cost),
                               log(costs["quantum-amplified"].expected_total_cost),
                               log(costs["quantum-chosen-input"].expected_total_cost)))
    return rows


def signal_state(signal, n_bos: int) -> FockVector:
    """Normalized ``v^{⊗n_bos}`` in the occupation basis."""
    v = signal.vector if isinstance(signal, SignalVector) else signal
    return product_state(v, n_bos)
