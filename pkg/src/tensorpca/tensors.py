"""Dense tensors, Gaussian ensembles and the spiked tensor model.

All tensors are stored as complex128 arrays of shape ``(N,) * order`` in
row-major order.  Real tensors keep a zero imaginary part and carry a
``real`` flag so downstream code can pick real arithmetic where it helps.

Seeding: every random tensor or vector is drawn from its own
``numpy.random.Generator``.  :func:`sample_instance` splits one seed into two
independent child streams with ``SeedSequence.spawn`` (child 0 for the signal,
child 1 for the noise).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from math import factorial, sqrt
from typing import Optional, Union

import numpy as np

from .errors import InvalidArgument

MAX_ENTRIES = 10**7


@dataclass(frozen=True)
class Ensemble:
    """Distribution of the noise tensor.

    ``field`` is ``"real"`` (unit-variance entries) or ``"complex"`` (real and
    imaginary parts each with variance 1/2).
    """

    field: str = "real"
    symmetrized: bool = False

    def __post_init__(self):
        if self.field not in ("real", "complex"):
            raise InvalidArgument(f"unknown ensemble field {self.field!r}")

    @property
    def is_complex(self) -> bool:
        return self.field == "complex"

    @classmethod
    def coerce(cls, value: Union["Ensemble", str, None], default: str = "real") -> "Ensemble":
        if value is None:
            return cls(default)
        if isinstance(value, Ensemble):
            return value
        return cls(str(value))


REAL = Ensemble("real")
COMPLEX = Ensemble("complex")


@dataclass(frozen=True, eq=False)
class DenseTensor:
    data: np.ndarray
    real: bool = False
    symmetric: bool = False

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim < 1 or len(set(arr.shape)) != 1:
            raise InvalidArgument(f"tensor must be hypercubic, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr, dtype=np.complex128)
        if self.real:
            arr = arr.real.astype(np.complex128)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.data.ravel()))

    def __add__(self, other: "DenseTensor") -> "DenseTensor":
        other = as_tensor(other)
        _check_same_shape(self, other)
        return DenseTensor(self.data + other.data, real=self.real and other.real,
                           symmetric=self.symmetric and other.symmetric)

    def scaled(self, factor: complex) -> "DenseTensor":
        is_real = self.real and complex(factor).imag == 0
        return DenseTensor(self.data * factor, real=is_real, symmetric=self.symmetric)

    def is_symmetric(self, atol: float = 1e-12) -> bool:
        return all(np.allclose(self.data, self.data.transpose(perm), atol=atol, rtol=0)
                   for perm in permutations(range(self.order)))


@dataclass(frozen=True, eq=False)
class SignalVector:
    vector: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=float).copy()
        norm = np.linalg.norm(v)
        if v.ndim != 1 or norm == 0:
            raise InvalidArgument("signal must be a nonzero 1-d vector")
        v *= sqrt(v.size) / norm
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.size


@dataclass(frozen=True, eq=False)
class SpikedInstance:
    lam: float
    signal: SignalVector
    noise: DenseTensor
    t0: DenseTensor
    ensemble: Ensemble = REAL
    seed: Optional[int] = None

    @property
    def order(self) -> int:
        return self.t0.order

    @property
    def dim(self) -> int:
        return self.t0.dim


def as_tensor(T) -> DenseTensor:
    """Accept a :class:`DenseTensor`, a :class:`SpikedInstance` or a raw array."""
    if isinstance(T, DenseTensor):
        return T
    if isinstance(T, SpikedInstance):
        return T.t0
    arr = np.asarray(T)
    return DenseTensor(arr, real=not np.iscomplexobj(arr) or not np.any(arr.imag))


def _check_same_shape(a: DenseTensor, b: DenseTensor) -> None:
    if a.data.shape != b.data.shape:
        raise InvalidArgument(f"shape mismatch {a.data.shape} vs {b.data.shape}")


def _check_size(p: int, N: int) -> None:
    if p < 1 or N < 1:
        raise InvalidArgument(f"order and dimension must be positive (p={p}, N={N})")
    if N**p > MAX_ENTRIES:
        raise InvalidArgument(f"N^p = {N**p} exceeds the dense cap {MAX_ENTRIES}")


def _gaussian(shape, ensemble: Ensemble, rng: np.random.Generator) -> np.ndarray:
    if ensemble.is_complex:
        parts = rng.standard_normal((2,) + tuple(shape))
        return (parts[0] + 1j * parts[1]) / sqrt(2.0)
    return rng.standard_normal(shape).astype(np.complex128)


def sample_gaussian_tensor(p: int, N: int, ensemble=REAL, seed=None) -> DenseTensor:
    """Draw an order-``p`` Gaussian tensor of dimension ``N``.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    p, N = int(p), int(N)
    _check_size(p, N)
    ensemble = Ensemble.coerce(ensemble)
    rng = np.random.default_rng(seed)
    data = _gaussian((N,) * p, ensemble, rng)
    T = DenseTensor(data, real=not ensemble.is_complex)
    return symmetrize(T) if ensemble.symmetrized else T


def sample_signal(N: int, seed=None) -> SignalVector:
    """Uniform direction on the sphere, rescaled to norm sqrt(N)."""
    if N < 1:
        raise InvalidArgument("N must be positive")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(N)
    while not np.any(v):
        v = rng.standard_normal(N)
    return SignalVector(v, seed=seed if isinstance(seed, (int, np.integer)) else None)


def symmetrize(T) -> DenseTensor:
    """Average of ``T`` over all permutations of its legs."""
    T = as_tensor(T)
    p = T.order
    acc = np.zeros_like(T.data)
    for perm in permutations(range(p)):
        acc += T.data.transpose(perm)
    return DenseTensor(acc / factorial(p), real=T.real, symmetric=True)


def outer_power(v, p: int) -> np.ndarray:
    """``v ⊗ v ⊗ ... ⊗ v`` (p factors) as an array."""
    v = np.asarray(v, dtype=np.complex128)
    out = np.ones((), dtype=np.complex128)
    for _ in range(p):
        out = np.multiply.outer(out, v)
    return out


def make_spiked(lam: float, signal: SignalVector, noise, ensemble=None, seed=None) -> SpikedInstance:
    noise = as_tensor(noise)
    if not isinstance(signal, SignalVector):
        signal = SignalVector(signal)
    if noise.dim != signal.dim:
        raise InvalidArgument(f"noise dimension {noise.dim} != signal dimension {signal.dim}")
    if lam < 0:
        raise InvalidArgument("lambda must be nonnegative")
    spike = lam * outer_power(signal.vector, noise.order) if lam else 0.0
    t0 = DenseTensor(noise.data + spike, real=noise.real, symmetric=noise.symmetric)
    if ensemble is None:
        ensemble = Ensemble("real" if noise.real else "complex", noise.symmetric)
    return SpikedInstance(float(lam), signal, noise, t0, Ensemble.coerce(ensemble), seed)


def sample_instance(p: int, N: int, lam: float, ensemble=REAL, seed=None) -> SpikedInstance:
    """Draw signal and noise from two child streams of ``seed``."""
    ensemble = Ensemble.coerce(ensemble)
    sig_seq, noise_seq = np.random.SeedSequence(seed).spawn(2)
    signal = sample_signal(N, sig_seq)
    noise = sample_gaussian_tensor(p, N, ensemble, noise_seq)
    inst = make_spiked(lam, signal, noise, ensemble=ensemble, seed=seed)
    return inst


def correlation(x, y) -> float:
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.shape != y.shape:
        raise InvalidArgument("vectors differ in length")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise InvalidArgument("correlation of a zero vector is undefined")
    return float(min(1.0, abs(np.vdot(x, y)) / (nx * ny)))


def tensor_power_step(t0, u) -> np.ndarray:
    """One tensor power iteration with the first leg left free.

    Returns ``x[mu] = sum T[mu, nu2, ..., nup] u[nu2] ... u[nup]``; the real
    part is returned since the planted direction is real.
    """
    T = as_tensor(t0)
    u = np.asarray(u)
    if u.shape != (T.dim,):
        raise InvalidArgument(f"vector of length {u.shape} does not match dimension {T.dim}")
    if abs(np.linalg.norm(u) - 1.0) > 1e-8:
        raise InvalidArgument("tensor_power_step expects a unit vector")
    x = T.data
    for _ in range(T.order - 1):
        x = x @ u
    return np.real(x).astype(float)


def unfold_to_matrix(T, k: int) -> np.ndarray:
    """Group the first ``k`` legs into rows and the rest into columns."""
    T = as_tensor(T)
    if not 1 <= k < T.order:
        raise InvalidArgument(f"split {k} out of range for order {T.order}")
    N = T.dim
    return T.data.reshape(N**k, N ** (T.order - k))
