"""Expectation values of Gaussian tensor networks by pairing enumeration.

A network is a list of vertices, each a copy of the random tensor ``G``, of
its conjugate ``Gbar``, or of the rank-one signal ``lam * v^{⊗p}`` with the
signal rotated to ``v = (sqrt(N), 0, ..., 0)``, together with edges joining
legs.  By Wick's theorem the expectation is a sum over perfect matchings of
the Gaussian vertices; each matching replaces every matched pair by
Kronecker deltas and contributes ``N`` for every closed index loop.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from itertools import permutations, product
from math import factorial, sqrt
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidArgument, SizeError
from .fock import annihilation_stack, get_basis
from .hamiltonian import build_even
from .spectral import _even_J
from .tensors import Ensemble, sample_gaussian_tensor

LABELS = ("G", "Gbar", "signal")
VERTEX_CAP = 12

Leg = Tuple[int, int]


@dataclass(frozen=True)
class Vertex:
    label: str
    order: int

    def __post_init__(self):
        if self.label not in LABELS:
            raise InvalidArgument(f"vertex label must be one of {LABELS}")
        if self.order < 1:
            raise InvalidArgument("vertex order must be positive")


@dataclass
class TensorNetwork:
    """Closed network of Gaussian and signal tensors.

    ``edges`` holds pairs of ``(vertex, leg)`` endpoints.  Every leg must be
    used exactly once, so the network evaluates to a scalar.
    """

    vertices: List[Vertex]
    edges: List[Tuple[Leg, Leg]]
    N: int
    ensemble: str = "real"
    symmetrized: bool = False
    lam: float = 1.0

    def __post_init__(self):
        self.vertices = [v if isinstance(v, Vertex) else Vertex(*v) for v in self.vertices]
        self.edges = [(tuple(a), tuple(b)) for a, b in self.edges]
        Ensemble(self.ensemble)
        seen = set()
        for a, b in self.edges:
            for v, leg in (a, b):
                if not 0 <= v < len(self.vertices) or not 0 <= leg < self.vertices[v].order:
                    raise InvalidArgument(f"edge endpoint {(v, leg)} does not exist")
                if (v, leg) in seen:
                    raise InvalidArgument(f"leg {(v, leg)} has more than one edge")
                seen.add((v, leg))
        total = sum(v.order for v in self.vertices)
        if len(seen) != total:
            raise InvalidArgument("every leg needs exactly one edge (open legs are not supported)")
        orders = {v.order for v in self.vertices if v.label != "signal"}
        if len(orders) > 1:
            raise InvalidArgument("all Gaussian vertices must be copies of one tensor")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def gaussian(self) -> List[int]:
        return [i for i, v in enumerate(self.vertices) if v.label != "signal"]

    @property
    def n_signal(self) -> int:
        return sum(v.label == "signal" for v in self.vertices)

    def to_json(self) -> str:
        return json.dumps({
            "N": self.N, "ensemble": self.ensemble, "symmetrized": self.symmetrized, "lam": self.lam,
            "vertices": [{"label": v.label, "order": v.order} for v in self.vertices],
            "edges": [[list(a), list(b)] for a, b in self.edges],
        })

    @classmethod
    def from_json(cls, text: str) -> "TensorNetwork":
        d = json.loads(text)
        return cls([Vertex(v["label"], v["order"]) for v in d["vertices"]],
                   [(tuple(a), tuple(b)) for a, b in d["edges"]], d["N"],
                   d.get("ensemble", "real"), d.get("symmetrized", False), d.get("lam", 1.0))


def doubled(net: TensorNetwork) -> TensorNetwork:
    """Network for ``|Val|^2``: the original next to its complex conjugate."""
    swap = {"G": "Gbar", "Gbar": "G", "signal": "signal"}
    k = len(net.vertices)
    if net.ensemble == "real":
        mirror = list(net.vertices)
    else:
        mirror = [Vertex(swap[v.label], v.order) for v in net.vertices]
    edges = list(net.edges) + [((a[0] + k, a[1]), (b[0] + k, b[1])) for a, b in net.edges]
    return TensorNetwork(list(net.vertices) + mirror, edges, net.N, net.ensemble, net.symmetrized, net.lam)


# ---- pairings ----------------------------------------------------------------

@dataclass(frozen=True)
class Pairing:
    pairs: Tuple[Tuple[int, int], ...]
    n_loop: int


@dataclass
class PairingSet:
    pairings: List[Pairing] = field(default_factory=list)
    zero_expectation: bool = False

    def __len__(self):
        return len(self.pairings)

    def __iter__(self):
        return iter(self.pairings)


def _matchings(items: Sequence[int]):
    if not items:
        yield ()
        return
    first, rest = items[0], items[1:]
    for i, other in enumerate(rest):
        for tail in _matchings(rest[:i] + rest[i + 1:]):
            yield ((first, other),) + tail


def _bipartite(gs: Sequence[int], gbars: Sequence[int]):
    for perm in permutations(gbars):
        yield tuple(zip(gs, perm))


class _DSU:
    def __init__(self):
        self.parent = {}

    def find(self, a):
        self.parent.setdefault(a, a)
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def _count_loops(net: TensorNetwork, pairs, leg_maps=None) -> int:
    dsu = _DSU()
    for a, b in net.edges:
        dsu.union(a, b)
    for k, (u, w) in enumerate(pairs):
        perm = leg_maps[k] if leg_maps is not None else range(net.vertices[u].order)
        for i, j in enumerate(perm):
            dsu.union((u, i), (w, j))
    pinned = {dsu.find((v, leg)) for v, vert in enumerate(net.vertices) if vert.label == "signal"
              for leg in range(vert.order)}
    roots = {dsu.find((v, leg)) for v, vert in enumerate(net.vertices) for leg in range(vert.order)}
    return len(roots - pinned)


def enumerate_pairings(net: TensorNetwork) -> PairingSet:
    gauss = net.gaussian
    if len(gauss) > VERTEX_CAP:
        raise SizeError(f"{len(gauss)} Gaussian vertices exceeds the cap {VERTEX_CAP}")
    if net.ensemble == "complex":
        gs = [i for i in gauss if net.vertices[i].label == "G"]
        gbars = [i for i in gauss if net.vertices[i].label == "Gbar"]
        if len(gs) != len(gbars):
            return PairingSet([], zero_expectation=True)
        raw = _bipartite(gs, gbars)
    else:
        if len(gauss) % 2:
            return PairingSet([], zero_expectation=True)
        raw = _matchings(gauss)
    return PairingSet([Pairing(pairs, _count_loops(net, pairs)) for pairs in raw])


def _signal_factor(net: TensorNetwork) -> float:
    legs = sum(v.order for v in net.vertices if v.label == "signal")
    return net.lam**net.n_signal * float(net.N) ** (legs / 2)


def pairing_value(net: TensorNetwork, pairing: Pairing) -> float:
    """Contribution of one pairing, including the signal prefactor."""
    base = _signal_factor(net)
    if not net.symmetrized or not pairing.pairs:
        return base * float(net.N) ** pairing.n_loop
    p = net.vertices[pairing.pairs[0][0]].order
    perms = list(permutations(range(p)))
    total = 0.0
    for choice in product(perms, repeat=len(pairing.pairs)):
        total += float(net.N) ** _count_loops(net, pairing.pairs, choice)
    return base * total / factorial(p) ** len(pairing.pairs)


def expected_value(net: TensorNetwork) -> float:
    pairs = enumerate_pairings(net)
    if pairs.zero_expectation:
        return 0.0
    return float(sum(pairing_value(net, pr) for pr in pairs))


# ---- Monte Carlo -----------------------------------------------------------------

def _einsum_spec(net: TensorNetwork):
    letters = iter(string.ascii_letters[1:])
    leg_letter: Dict[Leg, str] = {}
    for a, b in net.edges:
        c = next(letters)
        leg_letter[a] = leg_letter[b] = c
    subs = []
    for v, vert in enumerate(net.vertices):
        legs = "".join(leg_letter[(v, i)] for i in range(vert.order))
        subs.append(legs if vert.label == "signal" else "a" + legs)
    return ",".join(subs) + "->a"


def contract(net: TensorNetwork, G: np.ndarray) -> np.ndarray:
    """Value of the network for a batch of tensors ``G`` (leading batch axis)."""
    G = np.asarray(G)
    if net.gaussian:
        p = net.vertices[net.gaussian[0]].order
        if G.ndim == p:
            G = G[None]
        if G.ndim != p + 1 or any(s != net.N for s in G.shape[1:]):
            raise InvalidArgument("tensor shape does not match the network")
    v = np.zeros(net.N)
    v[0] = sqrt(net.N)
    ops = []
    for vert in net.vertices:
        if vert.label == "G":
            ops.append(G)
        elif vert.label == "Gbar":
            ops.append(np.conj(G) if net.ensemble == "complex" else G)
        else:
            sig = np.ones(())
            for _ in range(vert.order):
                sig = np.multiply.outer(sig, v)
            ops.append(net.lam * sig)
    spec = _einsum_spec(net)
    if not net.gaussian:
        spec = spec.replace("->a", "->")
        return np.full(G.shape[0], np.einsum(spec, *ops))
    return np.einsum(spec, *ops, optimize="greedy")


def mc_estimate(net: TensorNetwork, trials: int, seed=None, batch: int = 2000) -> Tuple[float, float]:
    """Sample mean and standard error of the (real part of the) network value."""
    if trials < 2:
        raise InvalidArgument("need at least two trials")
    rng = np.random.default_rng(seed)
    p = net.vertices[net.gaussian[0]].order if net.gaussian else 1
    ens = Ensemble(net.ensemble, net.symmetrized)
    vals = []
    done = 0
    while done < trials:
        m = min(batch, trials - done)
        if net.gaussian:
            G = np.stack([sample_gaussian_tensor(p, net.N, ens, rng).data for _ in range(m)]) \
                if net.symmetrized else _batch_gaussian(m, p, net.N, ens, rng)
        else:
            G = np.zeros((m,) + (net.N,) * p)
        vals.append(np.real(contract(net, G)))
        done += m
    vals = np.concatenate(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / sqrt(trials))


def _batch_gaussian(m, p, N, ens: Ensemble, rng) -> np.ndarray:
    shape = (m,) + (N,) * p
    if ens.is_complex:
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / sqrt(2.0)
    return rng.standard_normal(shape)


# ---- second moment of H(eta) ------------------------------------------------------

@dataclass
class H2Scalar:
    closed_form: float
    exact: float
    mc_mean: Optional[float]
    mc_stderr: Optional[float]


def exact_H2_mean_diagonal(p: int, N: int, n_bos: int, ensemble="real") -> float:
    """Exact ``tr(E[H(eta)^2]) / D`` for unsymmetrized Gaussian ``eta``.

    Uses ``H = B^H (I ⊗ M_h) B`` and the covariance of ``M_h``; see the module
    docstring of :mod:`tensorpca.hamiltonian` for ``B``.
    """
    q = p // 2
    ens = Ensemble.coerce(ensemble)
    basis = get_basis(N, n_bos)
    B = annihilation_stack(N, n_bos, q).toarray()
    F = B.reshape(-1, N**q, basis.dim)                      # (low, tuple, D)
    S = np.einsum("sbj,tbj->st", F, F.conj())
    pair_term = np.einsum("sai,st,tai->", F.conj(), S, F).real
    if ens.is_complex:
        total = 0.5 * pair_term
    else:
        P = np.einsum("sai,tak->stik", F.conj(), F.conj())
        Q = np.einsum("sbk,tbj->stkj", F, F)
        swap_term = np.einsum("stik,stki->", P, Q).real
        total = 0.5 * (pair_term + swap_term)
    return float(total / basis.dim)


def expected_H2_scalar(p: int, N: int, n_bos: int, ensemble="real", trials: int = 0,
                       seed=None) -> H2Scalar:
    """Leading-order closed form ``J n^{p/2} N^{p/2}`` for ``E[H(eta)^2]``.

    Also returns the exact mean diagonal and, when ``trials > 0``, a Monte
    Carlo average of ``tr(H^2)/D`` over dense materializations.
    """
    if p % 2:
        raise InvalidArgument("odd p: build the even-order tensor first")
    ens = Ensemble.coerce(ensemble)
    q = p // 2
    closed = _even_J(p, n_bos, ens.is_complex) * n_bos**q * N**q
    exact = exact_H2_mean_diagonal(p, N, n_bos, ens)
    mean = err = None
    if trials:
        rng = np.random.default_rng(seed)
        vals = np.empty(trials)
        for t in range(trials):
            eta = sample_gaussian_tensor(p, N, ens, rng)
            H = build_even(eta, n_bos).materialize_dense()
            vals[t] = np.sum(np.abs(H) ** 2) / H.shape[0]
        mean = float(vals.mean())
        err = float(vals.std(ddof=1) / sqrt(trials)) if trials > 1 else 0.0
    return H2Scalar(closed, exact, mean, err)
