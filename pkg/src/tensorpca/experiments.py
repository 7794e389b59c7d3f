"""Seeded experiment grids producing ``results.csv`` and ``summary.json``."""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import product
from math import log
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from .errors import ConfigError, InvalidArgument
from .fock import get_basis
from .hamiltonian import build_hamiltonian
from .pathsum import GeneratorCircuit, HamiltonianGate, HoppingGate, PathStats, amplitude_naive, \
    amplitude_recursive, call_bound, frame_bound
from .quantum import MAXIMALLY_MIXED, pe_model, prepare_chosen_input, runtime_model, success_probability
from .spectral import default_ensemble, detect, lambda_for_ratio, recover, thresholds
from .tensors import Ensemble, sample_instance
from .wick import TensorNetwork, Vertex, doubled, expected_value, mc_estimate

SCHEMA_VERSION = 1
EXPERIMENTS = ("detect", "recover", "null-spectrum", "odd-scaling", "wick-verify", "path-equivalence",
               "speedup-table", "quantum-overlap")
NEEDS_SIGNAL = ("detect", "recover", "quantum-overlap")
TOL_KEYS = {"draws": 10_000, "depth": 4, "eig_tol": 1e-8, "epsilon": 0.01}


@dataclass
class ExperimentConfig:
    experiment: str
    p: int
    Ns: List[int]
    nbos: List[int]
    lambdas: Optional[List[float]] = None
    ratios: Optional[List[float]] = None
    ensemble: Optional[str] = None
    symmetrize: bool = False
    trials: int = 1
    seed: int = 0
    out: str = "results"
    tol: Dict[str, float] = field(default_factory=dict)
    window: str = "erf"
    epsilon: Optional[float] = None
    workers: int = 1
    record_time: bool = False

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.p < 2:
            raise ConfigError("p must be at least 2")
        if not self.Ns or any(N < 2 for N in self.Ns):
            raise ConfigError("N values must be at least 2")
        if not self.nbos:
            raise ConfigError("at least one n_bos value is required")
        floor = self.p // 2 if self.p % 2 == 0 else self.p - 1
        bad = [n for n in self.nbos if n < floor]
        if bad:
            raise ConfigError(f"n_bos {bad} below the floor {floor} for p={self.p}")
        if self.lambdas and self.ratios:
            raise ConfigError("give either lambdas or ratios, not both")
        if self.experiment in NEEDS_SIGNAL and not (self.lambdas or self.ratios):
            raise ConfigError(f"{self.experiment} needs --lambda or --ratio")
        if any(x < 0 for x in (self.lambdas or []) + (self.ratios or [])):
            raise ConfigError("lambda and ratio values must be nonnegative")
        unknown = set(self.tol) - set(TOL_KEYS)
        if unknown:
            raise ConfigError(f"unknown tolerance keys {sorted(unknown)}; known: {sorted(TOL_KEYS)}")
        if self.window not in ("hard", "erf"):
            raise ConfigError("window must be hard or erf")
        try:
            Ensemble(self.field)
        except InvalidArgument as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def field(self) -> str:
        return self.ensemble or default_ensemble(self.p)

    def option(self, key: str):
        if key == "epsilon" and self.epsilon is not None:
            return self.epsilon
        return type(TOL_KEYS[key])(self.tol.get(key, TOL_KEYS[key]))

    def cells(self) -> List[dict]:
        if self.ratios:
            strengths = [("ratio", r) for r in self.ratios]
        elif self.lambdas:
            strengths = [("lambda", x) for x in self.lambdas]
        else:
            strengths = [("none", None)]
        out = []
        for N, n, (kind, val) in product(self.Ns, self.nbos, strengths):
            out.append({"p": self.p, "N": N, "n_bos": n, "strength": kind, "strength_value": val})
        return out


def trial_seed(master: int, cell: int, trial: int) -> int:
    """Stable per-trial seed derived from ``(master, cell, trial)``."""
    return int(np.random.SeedSequence([master, cell, trial]).generate_state(1, np.uint64)[0])


def _lambda_bar(cfg: ExperimentConfig, cell: dict) -> float:
    if cell["strength"] == "ratio":
        return lambda_for_ratio(cfg.p, cell["N"], cell["n_bos"], cell["strength_value"], cfg.field)
    if cell["strength"] == "lambda":
        return float(cell["strength_value"])
    return 1.0


# ---- trial runners ------------------------------------------------------------

def _ens(cfg):
    return Ensemble(cfg.field, cfg.symmetrize)


def _run_detect(cfg, cell, trial, seed):
    lam = _lambda_bar(cfg, cell)
    planted = trial % 2 == 0
    inst = sample_instance(cfg.p, cell["N"], lam if planted else 0.0, _ens(cfg), seed)
    rep = detect(inst, lam, cell["n_bos"], tol=cfg.option("eig_tol"), seed=seed)
    return {"lambda_bar": lam, "planted": planted, "lambda1": rep.lambda1, "decision": rep.decision,
            "correct": (rep.decision == "planted") == planted}


def _run_recover(cfg, cell, trial, seed):
    lam = _lambda_bar(cfg, cell)
    inst = sample_instance(cfg.p, cell["N"], lam, _ens(cfg), seed)
    rep = recover(inst, lam, cell["n_bos"], seed=seed)
    return {"lambda_bar": lam, "lambda1": rep.detection.lambda1, "decision": rep.detection.decision,
            "overlap_ratio": rep.overlap_ratio, "rounded_corr": rep.rounded_corr,
            "boosted_corr": rep.boosted_corr, "overlap_ok": rep.overlap_ratio >= 0.15,
            "boost_ok": rep.boosted_corr >= 0.9}


def _run_null(cfg, cell, trial, seed):
    th = thresholds(cfg.p, cell["N"], cell["n_bos"], 1.0, cfg.field)
    inst = sample_instance(cfg.p, cell["N"], 0.0, _ens(cfg), seed)
    rep = detect(inst, 1.0, cell["n_bos"], tol=cfg.option("eig_tol"), seed=seed)
    return {"lambda1": rep.lambda1, "Emax": th.Emax, "xi": th.xi,
            "exceeds_emax": rep.lambda1 >= th.Emax, "exceeds_emax_2xi": rep.lambda1 >= th.Emax + 2 * th.xi}


def _run_odd(cfg, cell, trial, seed):
    out = _run_null(cfg, cell, trial, seed)
    out["log_lambda1"] = log(out["lambda1"]) if out["lambda1"] > 0 else float("nan")
    return out


def wick_networks(N: int) -> Dict[str, TensorNetwork]:
    """Fixed test topologies used by ``wick-verify`` and the test suite."""
    G3, Gb3, G2 = Vertex("G", 3), Vertex("Gbar", 3), Vertex("G", 2)
    ring = [((0, 1), (1, 0)), ((1, 1), (2, 0)), ((2, 1), (3, 0)), ((3, 1), (0, 0))]
    return {
        "norm": TensorNetwork([G3, Gb3], [((0, i), (1, i)) for i in range(3)], N, "complex"),
        "ring4": TensorNetwork([G2] * 4, ring, N, "real"),
        "tetrahedron": TensorNetwork([G3, Gb3, G3, Gb3], [((0, 0), (1, 0)), ((0, 1), (2, 0)), ((0, 2), (3, 0)),
                                                          ((1, 1), (2, 1)), ((1, 2), (3, 1)), ((2, 2), (3, 2))],
                                     N, "complex"),
        "symmetrized-norm": TensorNetwork([Vertex("G", 3)] * 2, [((0, i), (1, i)) for i in range(3)], N, "real",
                                          symmetrized=True),
        "signal-ring": TensorNetwork([Vertex("signal", 2), G2, Vertex("signal", 2), G2], ring, N, "real", lam=0.5),
    }


def _run_wick(cfg, cell, trial, seed):
    nets = wick_networks(cell["N"])
    name = sorted(nets)[trial % len(nets)]
    net = nets[name]
    exact = expected_value(net)
    mean, err = mc_estimate(net, cfg.option("draws"), seed)
    dbl = expected_value(doubled(net))
    return {"network": name, "exact": exact, "mc_mean": mean, "mc_stderr": err,
            "z": abs(mean - exact) / err if err > 0 else 0.0, "within_3se": abs(mean - exact) <= 3 * err,
            "second_moment": dbl, "edge_bound": float(net.N) ** net.n_edges,
            # the edge-count bound is a statement about purely Gaussian networks
            "bound_holds": None if net.n_signal else dbl >= float(net.N) ** net.n_edges}


def _run_path(cfg, cell, trial, seed):
    rng = np.random.default_rng(seed)
    N, n = cell["N"], cell["n_bos"]
    inst = sample_instance(cfg.p, N, _lambda_bar(cfg, cell) if cell["strength"] != "none" else 0.0, _ens(cfg), seed)
    H = build_hamiltonian(inst.t0, n)
    basis = get_basis(N, n)
    depth = cfg.option("depth")
    gates = []
    for k in range(depth):
        if k % 2 == 0:
            gates.append(HamiltonianGate(H))
        else:
            gates.append(HoppingGate(int(rng.integers(N)), int(rng.integers(N))))
    circ = GeneratorCircuit(gates, basis)
    dense = circ.dense()
    x = int(rng.integers(basis.dim))
    col = np.abs(dense[:, x])
    y = int(np.argmax(col)) if col.max() > 0 else x
    s = PathStats()
    rec = amplitude_recursive(circ, x, y, s)
    naive = amplitude_naive(circ, x, y)
    ref = dense[y, x]
    scale = max(abs(ref), 1e-300)
    return {"D": basis.dim, "depth": depth, "dense": abs(ref), "rel_err_recursive": abs(rec - ref) / scale,
            "rel_err_naive": abs(naive - ref) / scale, "calls": s.calls, "base_calls": s.base_calls,
            "call_bound": call_bound(depth, basis.dim), "max_frames": s.max_live_frames,
            "frame_bound": frame_bound(depth)}


def _run_speedup(cfg, cell, trial, seed):
    # strength values are read as C = lambda * N^{p/4}
    C = cell["strength_value"] if cell["strength"] == "lambda" else 1.0
    N, n = cell["N"], cell["n_bos"]
    lam = C * N ** (-cfg.p / 4)
    costs = {v: runtime_model(v, cfg.p, N, n, lam, cfg.field, cfg.option("epsilon"))
             for v in ("classical-power", "quantum-unamplified", "quantum-amplified", "quantum-chosen-input")}
    lc = log(costs["classical-power"].expected_total_cost)
    out = {"C": C, "lambda_bar": lam}
    for v, rec in costs.items():
        key = v.replace("quantum-", "").replace("-", "_")
        out[f"cost_{key}"] = rec.expected_total_cost
        out[f"p_success_{key}"] = rec.success_probability
    out["amplified_ratio"] = log(costs["quantum-amplified"].expected_total_cost) / lc
    out["chosen_ratio"] = log(costs["quantum-chosen-input"].expected_total_cost) / lc
    return out


def _run_quantum(cfg, cell, trial, seed):
    lam = _lambda_bar(cfg, cell)
    N, n = cell["N"], cell["n_bos"]
    inst = sample_instance(cfg.p, N, lam, _ens(cfg), seed)
    th = thresholds(cfg.p, N, n, lam, cfg.field)
    model = pe_model(build_hamiltonian(inst.t0, n), th, cfg.option("epsilon"), cfg.window)
    chosen = prepare_chosen_input(inst, n, pad=True)
    mixed = success_probability(model, MAXIMALLY_MIXED)
    ch = success_probability(model, chosen)
    C = lam * N ** (cfg.p / 4)
    return {"lambda_bar": lam, "signal_overlap": chosen.signal_overlap,
            "overlap_target": C ** (2 * n / cfg.p) * N ** (-n / 2), "projection_weight": chosen.weight,
            "success_mixed": mixed, "success_chosen": ch, "gain": ch / mixed if mixed > 0 else float("inf"),
            "approximate": chosen.approximate}


RUNNERS: Dict[str, Callable] = {
    "detect": _run_detect, "recover": _run_recover, "null-spectrum": _run_null, "odd-scaling": _run_odd,
    "wick-verify": _run_wick, "path-equivalence": _run_path, "speedup-table": _run_speedup,
    "quantum-overlap": _run_quantum,
}


def _one(args):
    cfg, cell_idx, cell, trial = args
    seed = trial_seed(cfg.seed, cell_idx, trial)
    row = {"cell": cell_idx, **cell, "ensemble": cfg.field, "symmetrized": cfg.symmetrize,
           "trial": trial, "seed": seed, "failed": False, "error": ""}
    t = time.perf_counter()
    try:
        row.update(RUNNERS[cfg.experiment](cfg, cell, trial, seed))
    except Exception as exc:  # recorded as a failed row; the grid keeps going
        row["failed"] = True
        row["error"] = f"{type(exc).__name__}: {exc}"
    if cfg.record_time:
        row["wall_time"] = time.perf_counter() - t
    return row


# ---- output ---------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(s: str):
    if s == "":
        return None
    if s in ("true", "false"):
        return s == "true"
    for cast in (int, float):
        try:
            return cast(s)
        except ValueError:
            pass
    return s


def schema_line(experiment: str) -> str:
    return f"# tensorpca-results schema={SCHEMA_VERSION} experiment={experiment}"


def rows_to_csv(rows: Sequence[dict], experiment: str) -> str:
    cols: List[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    buf.write(schema_line(experiment) + "\n")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in cols})
    return buf.getvalue()


def read_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return [{k: _parse(v) for k, v in r.items()} for r in csv.DictReader(lines)]


def wilson(successes: int, n: int, level: float = 0.95):
    ci = binomtest(successes, n).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


CELL_KEYS = ("cell", "p", "N", "n_bos", "strength", "strength_value", "ensemble", "symmetrized")
SKIP = set(CELL_KEYS) | {"trial", "seed", "error", "wall_time", "network", "decision"}


def emit_summary(rows: Sequence[dict], experiment: Optional[str] = None) -> dict:
    """Per-cell aggregates: means of numeric fields, rates with Wilson intervals.

    Adds a log-log slope of ``lambda1`` against ``N`` for odd-scaling and the
    cost-ratio trend for speedup-table.
    """
    if not rows:
        raise InvalidArgument("no rows to summarize")
    groups: Dict[tuple, List[dict]] = {}
    for r in rows:
        key = tuple(r.get(k) for k in CELL_KEYS)
        groups.setdefault(key, []).append(r)
    cells = []
    for key, rs in groups.items():
        entry = {k: v for k, v in zip(CELL_KEYS, key) if v is not None}
        ok = [r for r in rs if not r.get("failed")]
        entry["trials"] = len(rs)
        entry["failures"] = len(rs) - len(ok)
        fields = [k for k in rs[0] if k not in SKIP and k != "failed"]
        for k in fields:
            vals = [r.get(k) for r in ok if r.get(k) is not None]
            if not vals:
                continue
            if all(isinstance(v, (bool, np.bool_)) for v in vals):
                hits = int(sum(bool(v) for v in vals))
                lo, hi = wilson(hits, len(vals))
                entry[f"{k}_rate"] = hits / len(vals)
                entry[f"{k}_ci"] = [lo, hi]
            elif all(isinstance(v, (int, float, np.integer, np.floating)) for v in vals):
                arr = np.asarray(vals, dtype=float)
                entry[f"{k}_mean"] = float(arr.mean())
        cells.append(entry)
    out = {"schema": SCHEMA_VERSION, "experiment": experiment, "cells": cells}
    if experiment == "odd-scaling":
        pts = [(c["N"], c["log_lambda1_mean"]) for c in cells if "log_lambda1_mean" in c]
        if len({n for n, _ in pts}) >= 2:
            xs = np.log([n for n, _ in pts])
            ys = np.array([y for _, y in pts])
            out["slope"] = float(np.polyfit(xs, ys, 1)[0])
    if experiment == "speedup-table":
        seq = [c["chosen_ratio_mean"] for c in sorted(cells, key=lambda c: c["N"]) if "chosen_ratio_mean" in c]
        out["chosen_ratio_decreasing"] = bool(all(b < a for a, b in zip(seq, seq[1:])))
        out["chosen_ratio_above_quarter"] = bool(all(x > 0.25 for x in seq))
    return out


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(type(o))


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run the grid, flushing rows after each cell; returns the summary."""
    cfg.validate()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    rows: List[dict] = []
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        for idx, cell in enumerate(cfg.cells()):
            jobs = [(cfg, idx, cell, t) for t in range(cfg.trials)]
            rows.extend(pool.map(_one, jobs) if pool else map(_one, jobs))
            csv_path.write_text(rows_to_csv(rows, cfg.experiment))
    finally:
        if pool:
            pool.shutdown()
    summary = emit_summary(rows, cfg.experiment)
    summary["config"] = {k: v for k, v in asdict(cfg).items() if k != "out"}
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True, default=_json_default))
    return summary


def has_failures(summary: dict) -> bool:
    return any(c.get("failures") for c in summary["cells"])

