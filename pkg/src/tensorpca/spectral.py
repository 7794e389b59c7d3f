"""Detection and recovery through the top eigenvector of H(T0)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb, factorial, log, sqrt
from typing import Optional

import numpy as np
from scipy.linalg import eigh

from .errors import ConvergenceError, InvalidArgument
from .fock import DensityMatrix, FockVector, single_particle_density_matrix
from .hamiltonian import DENSE_CAP, HamiltonianOperator, build_hamiltonian
from .tensors import Ensemble, SignalVector, SpikedInstance, as_tensor, correlation, tensor_power_step

log_ = logging.getLogger(__name__)

ROUNDING_RETRIES = 8
PSD_TOL = 1e-8


# ---- thresholds ------------------------------------------------------------

@dataclass(frozen=True)
class SpectralThresholds:
    E0: float
    Emax: float
    Ecut: float
    xi: float
    J: float
    parity: str
    p: int
    N: int
    n_bos: int
    lambda_bar: float
    ensemble: str

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _even_J(order: int, n_bos: int, complex_field: bool) -> float:
    q = order // 2
    J = factorial(q) * comb(n_bos, q) / n_bos**q
    return 2 * J if complex_field else J


def default_ensemble(p: int) -> str:
    return "real" if p % 2 == 0 else "complex"


def thresholds(p: int, N: int, n_bos: int, lambda_bar: float, ensemble=None) -> SpectralThresholds:
    """Planted energy, null bound, cut and tail scale for given parameters."""
    if p < 2 or N < 2:
        raise InvalidArgument("need p >= 2 and N >= 2")
    if lambda_bar < 0:
        raise InvalidArgument("lambda_bar must be nonnegative")
    ens = Ensemble.coerce(ensemble, default_ensemble(p))
    cplx = ens.is_complex
    lnN = log(N)
    if p % 2 == 0:
        q = p // 2
        if n_bos < q:
            raise InvalidArgument(f"even p needs n_bos >= {q}")
        J = _even_J(p, n_bos, cplx)
        E0 = lambda_bar * factorial(q) * comb(n_bos, q) * N**q
        Emax = sqrt(2 * J * lnN) * n_bos ** (p / 4 + 0.5) * N ** (p / 4)
        xi = sqrt(J) * n_bos ** (p / 4 - 0.5) * N ** (p / 4) / sqrt(2 * lnN)
        parity = "even"
    else:
        if n_bos < p - 1:
            raise InvalidArgument(f"odd p needs n_bos >= {p - 1}")
        J = _even_J(2 * (p - 1), n_bos, cplx)
        E0 = lambda_bar**2 * factorial(p - 1) * comb(n_bos, p - 1) * N**p
        Emax = 2 * sqrt(J * lnN) * n_bos ** (p / 2) * N ** (p / 2)
        xi = sqrt(J) * n_bos ** (p / 2 - 1) * N ** (p / 2) / sqrt(lnN)
        parity = "odd"
    return SpectralThresholds(E0=E0, Emax=Emax, Ecut=(E0 + Emax) / 2, xi=xi, J=J, parity=parity,
                              p=p, N=N, n_bos=n_bos, lambda_bar=float(lambda_bar), ensemble=ens.field)


def lambda_for_ratio(p: int, N: int, n_bos: int, ratio: float, ensemble=None) -> float:
    """Signal strength at which ``E0 = ratio * Emax``."""
    if ratio < 0:
        raise InvalidArgument("ratio must be nonnegative")
    unit = thresholds(p, N, n_bos, 1.0, ensemble)
    target = ratio * unit.Emax
    # E0 is linear in lambda for even p and quadratic for odd p
    return target / unit.E0 if p % 2 == 0 else sqrt(target / unit.E0)


# ---- eigensolver -----------------------------------------------------------

@dataclass
class EigenResult:
    value: float
    vector: FockVector
    iterations: int
    residual: float
    method: str


def _dense_top(H: HamiltonianOperator) -> EigenResult:
    M = H.materialize_dense()
    w, V = eigh(M, subset_by_index=[M.shape[0] - 1, M.shape[0] - 1])
    vec = V[:, 0]
    lam = float(w[0])
    res = float(np.linalg.norm(M @ vec - lam * vec))
    return EigenResult(lam, FockVector(H.basis, vec), 0, res, "dense")


def leading_eigenpair(H: HamiltonianOperator, tol: float = 1e-8, max_iter: Optional[int] = None,
                      seed=0, method: str = "power", dense_cap: int = DENSE_CAP) -> EigenResult:
    """Largest eigenvalue of ``H`` and a unit eigenvector.

    ``method="power"`` runs power iteration on ``H + sigma*I`` with ``sigma``
    the cached norm bound, so the top of the spectrum dominates even when
    the spectrum is symmetric.  If it does not converge and the dimension is
    below ``dense_cap`` the dense eigensolver takes over; otherwise a
    :class:`ConvergenceError` carrying the best iterate is raised.
    ``method="dense"`` goes straight to the dense solver and ``"auto"`` picks
    dense below the cap and power iteration above it.
    """
    D = H.dim
    if method not in ("power", "dense", "auto"):
        raise InvalidArgument(f"unknown method {method!r}")
    if method == "auto":
        method = "dense" if D <= dense_cap else "power"
    if method == "dense":
        return _dense_top(H)

    if max_iter is None:
        max_iter = max(100, int(10 * D * log(max(D, 2))))
    sigma = H.norm_bound
    rng = np.random.default_rng(seed)
    psi = rng.standard_normal(D) + 0j
    if not H.source.real:
        psi = psi + 1j * rng.standard_normal(D)
    psi /= np.linalg.norm(psi)
    best = (np.inf, 0.0, psi)
    for it in range(1, max_iter + 1):
        Hpsi = H.matvec(psi)
        lam = float(np.real(np.vdot(psi, Hpsi)))
        res = float(np.linalg.norm(Hpsi - lam * psi))
        if res < best[0]:
            best = (res, lam, psi)
        if res <= tol * max(abs(lam), 1e-300) or res == 0.0:
            return EigenResult(lam, FockVector(H.basis, psi), it, res, "power")
        nxt = Hpsi + sigma * psi
        nrm = np.linalg.norm(nxt)
        if nrm == 0:
            break
        psi = nxt / nrm
    if D <= dense_cap:
        log_.info("power iteration stalled at residual %.3g; using dense fallback", best[0])
        out = _dense_top(H)
        out.method = "dense-fallback"
        out.iterations = max_iter
        return out
    res, lam, psi = best
    raise ConvergenceError(f"power iteration did not converge in {max_iter} steps (residual {res:.3g})",
                           value=lam, vector=FockVector(H.basis, psi), residual=res, iterations=max_iter)


# ---- detection ---------------------------------------------------------------

@dataclass
class DetectionReport:
    lambda1: float
    thresholds: SpectralThresholds
    decision: str
    iterations: int
    residual: float
    eigvec: Optional[FockVector] = field(default=None, repr=False)
    method: str = ""


def decide(lambda1: float, th: SpectralThresholds) -> str:
    """``"planted"`` iff the top eigenvalue exceeds the cut (ties go to null)."""
    return "planted" if lambda1 > th.Ecut else "null"


def _ensemble_of(t0) -> str:
    if isinstance(t0, SpikedInstance):
        return t0.ensemble.field
    return "real" if as_tensor(t0).real else "complex"


def detect(t0, lambda_bar: float, n_bos: int, ensemble=None, method: str = "auto",
           tol: float = 1e-8, seed=0) -> DetectionReport:
    T = as_tensor(t0)
    ens = ensemble if ensemble is not None else _ensemble_of(t0)
    th = thresholds(T.order, T.dim, n_bos, lambda_bar, ens)
    H = build_hamiltonian(T, n_bos)
    eig = leading_eigenpair(H, tol=tol, seed=seed, method=method)
    return DetectionReport(eig.value, th, decide(eig.value, th), eig.iterations, eig.residual,
                           eig.vector, eig.method)


# ---- rounding and recovery -------------------------------------------------

def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=np.complex128)


def randomized_rounding(rho, seed=None, real: Optional[bool] = None) -> np.ndarray:
    """Gaussian vector with covariance ``rho``, normalized to unit length.

    Draws ``u = conj(L) z`` with ``L L^H = rho`` so that
    ``E[conj(u_i) u_j] = rho_ij``.  Real ``rho`` uses real Gaussians unless
    ``real=False`` is passed.
    """
    M = _as_matrix(rho)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgument("rho must be a square matrix")
    if np.abs(M - M.conj().T).max() > 1e-10:
        raise InvalidArgument("rho must be Hermitian")
    w, V = np.linalg.eigh(M)
    if w[0] < -PSD_TOL:
        raise InvalidArgument(f"rho is not positive semidefinite (min eigenvalue {w[0]:.3g})")
    L = V * np.sqrt(np.clip(w, 0, None))
    is_real = (np.abs(M.imag).max() <= 1e-12) if real is None else real
    rng = np.random.default_rng(seed)
    n = M.shape[0]
    for _ in range(100):
        if is_real:
            u = np.real(L) @ rng.standard_normal(n)
        else:
            z = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / sqrt(2.0)
            u = np.conj(L) @ z
        nrm = np.linalg.norm(u)
        if nrm > 0:
            return u / nrm
    raise InvalidArgument("rho appears to be zero")


def _align_phase(w: np.ndarray) -> np.ndarray:
    """Rotate a complex vector by a global phase to be as real as possible."""
    if np.isrealobj(w):
        return w
    theta = 0.5 * np.angle(np.sum(w * w))
    r = np.real(w * np.exp(-1j * theta))
    nrm = np.linalg.norm(r)
    return r / nrm if nrm > 0 else np.real(w) / max(np.linalg.norm(np.real(w)), 1e-300)


@dataclass
class RecoveryReport:
    rho1: DensityMatrix
    overlap_ratio: Optional[float]
    recovered: np.ndarray
    boosted_corr: Optional[float]
    rounded: np.ndarray
    rounded_corr: Optional[float]
    failed: bool
    detection: DetectionReport


def recover_from_state(t0, state: FockVector, seed=None, signal=None, retries: int = ROUNDING_RETRIES):
    """Density matrix, rounding and one boosting step from a given state."""
    T = as_tensor(t0)
    rho = single_particle_density_matrix(state)
    seeds = np.random.SeedSequence(seed).spawn(retries)
    best_w, best_score = None, -np.inf
    for s in seeds:
        w = randomized_rounding(rho, s)
        score = rho.expectation(w)
        if score > best_score:
            best_w, best_score = w, score
    w = _align_phase(best_w)
    x = tensor_power_step(T, w)
    nrm = np.linalg.norm(x)
    recovered = x / nrm if nrm > 0 else x
    v = signal.vector if isinstance(signal, SignalVector) else signal
    overlap = boosted = rounded = None
    if v is not None:
        v = np.asarray(v, dtype=float)
        overlap = float(np.clip(rho.expectation(v) / np.dot(v, v), 0.0, 1.0))
        rounded = correlation(w, v)
        boosted = correlation(recovered, v) if nrm > 0 else 0.0
    return rho, overlap, recovered, boosted, w, rounded


def recover(t0, lambda_bar: float, n_bos: int, seed=None, signal=None, ensemble=None,
            method: str = "auto", retries: int = ROUNDING_RETRIES) -> RecoveryReport:
    """Run detection, then round the top eigenvector's density matrix and boost."""
    if signal is None and isinstance(t0, SpikedInstance):
        signal = t0.signal
    det = detect(t0, lambda_bar, n_bos, ensemble=ensemble, method=method, seed=seed or 0)
    rho, overlap, recovered, boosted, w, rounded = recover_from_state(
        t0, det.eigvec, seed=seed, signal=signal, retries=retries)
    return RecoveryReport(rho, overlap, recovered, boosted, w, rounded,
                          failed=det.decision != "planted", detection=det)
