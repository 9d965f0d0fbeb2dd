"""R1/R2 evaluation over all seed nodes, parameter sweeps and best-scheme maps.

Run ``k`` of seed ``v`` uses the same random stream with and without
mitigation (common random numbers), so at gamma = 0 or q0 = 0 both
conditions produce identical cascades and R1 = R2 = 1 exactly.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels
from .cascade import CascadeParams
from .mitigation import SCHEMES, MitigationScheme, n_mitigated, scheme_scores
from .rng import CASCADE, RANKING, row_width, stream_key
from .schedule import ActivityNetwork

log = logging.getLogger(__name__)

UNSPECIFIED = "UNSPECIFIED"
RESULTS_HEADER = ("metric", "scheme", "q0", "tau_tilde", "gamma", "value", "n_runs", "master_seed")
BESTMAP_HEADER = ("metric", "tau_tilde", "q0", "gamma", "best_scheme")
METRICS = ("R1", "R2", "U", "M")

DEFAULT_Q0 = tuple(round(0.05 * k, 2) for k in range(1, 21))
DEFAULT_GAMMA = tuple(round(0.1 * k, 1) for k in range(11))
DEFAULT_TAU = (1.0, 10.0, 100.0, 1000.0)


def default_threads() -> int:
    return max(1, min(8, os.cpu_count() or 1))


class IncompleteTableError(ValueError):
    def __init__(self, missing):
        self.missing = list(missing)
        preview = "; ".join(f"tau_tilde={t} q0={q} gamma={g}: missing {', '.join(s)}"
                            for (t, q, g), s in self.missing[:10])
        more = f" (+{len(self.missing) - 10} more)" if len(self.missing) > 10 else ""
        super().__init__(f"results table does not cover every scheme: {preview}{more}")


class SizeEngine:
    """Per-seed cascade sizes for the whole network, cached per topology.

    Work is split across seed nodes; each seed's numbers come from its own
    stream, so the thread count never changes a result.
    """

    def __init__(self, net: ActivityNetwork, master_seed: int = 0, threads: int = 1):
        self.net = net
        self.master_seed = int(master_seed)
        self.threads = max(1, int(threads))
        self.comps = [net.out_component_index(s) for s in range(net.n_nodes)]
        self.comps_by_index = [np.sort(c) for c in self.comps]
        self.width = row_width(net.n_nodes)
        self.keys = [(stream_key(self.master_seed, s, CASCADE), stream_key(self.master_seed, s, RANKING))
                     for s in range(net.n_nodes)]
        self._unmitigated: dict = {}

    def _map(self, fn) -> np.ndarray:
        seeds = range(self.net.n_nodes)
        if self.threads == 1:
            rows = [fn(s) for s in seeds]
        else:
            fn(0)  # compile before fanning out
            with ThreadPoolExecutor(self.threads) as pool:
                rows = list(pool.map(fn, seeds))
        return np.vstack(rows) if rows else np.empty((0, 0), dtype=np.int64)

    def unmitigated(self, params: CascadeParams, n_runs: int) -> np.ndarray:
        key = (params, n_runs)
        if key not in self._unmitigated:
            net = self.net

            def one(s):
                comp = self.comps[s]
                if len(comp) == 0:
                    return np.ones(n_runs, dtype=np.int64)
                return _kernels.cascade_sizes(s, comp, net.pred_ptr, net.pred_edge, net.src,
                                              net.starts, net.ends, float(params.q0),
                                              float(params.tau_tilde), self.keys[s][0],
                                              self.width, 0, n_runs)

            self._unmitigated[key] = self._map(one)
        return self._unmitigated[key]

    def mitigated(self, scheme: MitigationScheme, params: CascadeParams, gamma: float,
                  n_runs: int) -> np.ndarray:
        net = self.net
        scores = scheme_scores(net, scheme.kind)
        random_scores = scores is None
        key = np.zeros(net.n_nodes) if random_scores else (-scores if scheme.descending else scores)
        base = None

        def one(s):
            comp = self.comps[s]
            m = n_mitigated(gamma, len(comp))
            if m == 0 or params.q0 == 0.0:
                return base[s]
            return _kernels.mitigated_sizes(
                s, comp, self.comps_by_index[s], m, key, random_scores,
                net.succ_ptr, net.dst, net.pred_ptr, net.pred_edge, net.src,
                net.starts, net.ends, net.project_end,
                float(params.q0), float(params.tau_tilde), self.keys[s][0], self.keys[s][1],
                self.width, 0, n_runs)

        base = self.unmitigated(params, n_runs)
        return self._map(one)


@dataclass
class CellResult:
    scheme: str
    q0: float
    tau_tilde: float
    gamma: float
    n_runs: int
    master_seed: int
    R1: float
    R2: float
    U: float
    M: float
    R1_se: float = math.nan
    R2_se: float = math.nan
    R1_se_unpaired: float = math.nan
    R2_se_unpaired: float = math.nan

    @property
    def cell(self):
        return (self.tau_tilde, self.q0, self.gamma)


def _var(x, axis=1):
    return x.var(axis=axis, ddof=1) if x.shape[axis] > 1 else np.full(x.shape[0], math.nan)


def summarise(mitigated: np.ndarray, unmitigated: np.ndarray, *, ratio: str = "seed-means",
              exclude_trivial: np.ndarray | None = None) -> dict:
    """R1, R2 and delta-method standard errors from per-(seed, run) sizes.

    ``ratio='seed-means'`` averages mean(M_v)/mean(U_v) over seeds;
    ``'run-ratios'`` averages the per-run ratio M_vk/U_vk instead. Paired
    errors use the pairing of runs; unpaired errors treat the two
    conditions as independent samples.
    """
    M = np.asarray(mitigated, dtype=float)
    U = np.asarray(unmitigated, dtype=float)
    if exclude_trivial is not None:
        M, U = M[~exclude_trivial], U[~exclude_trivial]
    n_seeds, n = U.shape
    if n_seeds == 0:
        raise ValueError("no seed nodes left to average over")
    m_v, u_v = M.mean(axis=1), U.mean(axis=1)
    if ratio == "seed-means":
        r_v = m_v / u_v
    elif ratio == "run-ratios":
        r_v = (M / U).mean(axis=1)
    else:
        raise ValueError(f"unknown ratio mode {ratio!r}")
    R1 = float(r_v.mean())
    R2 = float(m_v.sum() / u_v.sum())

    if ratio == "seed-means":
        var_r = _var(M - r_v[:, None] * U) / (n * u_v**2)
        var_r_un = (_var(M) + r_v**2 * _var(U)) / (n * u_v**2)
    else:
        var_r = var_r_un = _var(M / U) / n
    var2 = _var(M - R2 * U).sum() / n / u_v.sum() ** 2
    var2_un = (_var(M) + R2**2 * _var(U)).sum() / n / u_v.sum() ** 2
    return {
        "R1": R1, "R2": R2, "U": float(u_v.mean()), "M": float(m_v.mean()),
        "R1_se": float(math.sqrt(var_r.sum()) / n_seeds),
        "R2_se": float(math.sqrt(var2)),
        "R1_se_unpaired": float(math.sqrt(var_r_un.sum()) / n_seeds),
        "R2_se_unpaired": float(math.sqrt(var2_un)),
    }


def _as_scheme(scheme, date_order="latest") -> MitigationScheme:
    return scheme if isinstance(scheme, MitigationScheme) else MitigationScheme(scheme, date_order)


def evaluate_cell(net_or_engine, scheme, params: CascadeParams, gamma: float, n_runs: int,
                  master_seed: int = 0, *, ratio: str = "seed-means",
                  exclude_trivial: bool = False, threads: int = 1) -> CellResult:
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    engine = (net_or_engine if isinstance(net_or_engine, SizeEngine)
              else SizeEngine(net_or_engine, master_seed, threads))
    scheme = _as_scheme(scheme)
    U = engine.unmitigated(params, n_runs)
    M = U if gamma == 0 else engine.mitigated(scheme, params, gamma, n_runs)
    trivial = np.array([len(c) == 0 for c in engine.comps]) if exclude_trivial else None
    s = summarise(M, U, ratio=ratio, exclude_trivial=trivial)
    return CellResult(scheme.kind, float(params.q0), float(params.tau_tilde), float(gamma),
                      int(n_runs), engine.master_seed, **s)


def compute_R1(net, scheme, params, gamma, n_runs, master_seed=0, **kw) -> float:
    """Mean over seeds of mitigated / unmitigated mean cascade size."""
    return evaluate_cell(net, scheme, params, gamma, n_runs, master_seed, **kw).R1


def compute_R2(net, scheme, params, gamma, n_runs, master_seed=0, **kw) -> float:
    """Seed-averaged mitigated size over seed-averaged unmitigated size."""
    return evaluate_cell(net, scheme, params, gamma, n_runs, master_seed, **kw).R2


@dataclass
class SweepConfig:
    q0: Sequence[float] = DEFAULT_Q0
    tau_tilde: Sequence[float] = DEFAULT_TAU
    gamma: Sequence[float] = DEFAULT_GAMMA
    schemes: Sequence[str] = SCHEMES
    n_runs: int = 100
    # larger tau_tilde needs more runs to resolve R close to 1
    n_runs_large_tau: int = 300
    large_tau: float = 1e4
    master_seed: int = 0
    date_order: str = "latest"
    ratio: str = "seed-means"
    exclude_trivial: bool = False

    def __post_init__(self):
        for name in ("q0", "tau_tilde", "gamma", "schemes"):
            vals = tuple(getattr(self, name))
            if not vals:
                raise ValueError(f"{name} grid is empty")
            setattr(self, name, vals)
        for q in self.q0:
            if not 0.0 <= q <= 1.0:
                raise ValueError(f"q0 value {q} outside [0, 1]")
        for t in self.tau_tilde:
            if not t > 0:
                raise ValueError(f"tau_tilde value {t} must be positive")
        for g in self.gamma:
            if not 0.0 <= g <= 1.0:
                raise ValueError(f"gamma value {g} outside [0, 1]")
        for s in self.schemes:
            MitigationScheme(s, self.date_order)
        if self.n_runs < 1 or self.n_runs_large_tau < 1:
            raise ValueError("run counts must be positive")
        if self.ratio not in ("seed-means", "run-ratios"):
            raise ValueError(f"unknown ratio mode {self.ratio!r}")

    def runs_for(self, tau_tilde: float) -> int:
        return self.n_runs_large_tau if tau_tilde >= self.large_tau else self.n_runs

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass
class ResultsTable:
    rows: list[CellResult] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def records(self, metric: str):
        for r in self.rows:
            yield r.scheme, r.cell, getattr(r, metric)

    def to_csv(self, path_or_fh) -> None:
        fh = open(path_or_fh, "w", newline="", encoding="utf-8") if isinstance(path_or_fh, (str, Path)) else path_or_fh
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(RESULTS_HEADER)
            for r in self.rows:
                for metric in METRICS:
                    w.writerow([metric, r.scheme, repr(r.q0), repr(r.tau_tilde), repr(r.gamma),
                                repr(getattr(r, metric)), r.n_runs, r.master_seed])
        finally:
            if isinstance(path_or_fh, (str, Path)):
                fh.close()

    @classmethod
    def from_csv(cls, path_or_fh) -> "ResultsTable":
        fh = open(path_or_fh, newline="", encoding="utf-8") if isinstance(path_or_fh, (str, Path)) else path_or_fh
        try:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != RESULTS_HEADER:
                raise ValueError(f"expected header {','.join(RESULTS_HEADER)}")
            cells: dict = {}
            for row in reader:
                if not row:
                    continue
                if len(row) != len(RESULTS_HEADER):
                    raise ValueError(f"line {reader.line_num}: expected {len(RESULTS_HEADER)} fields")
                metric, scheme, q0, tau, gamma, value, n_runs, seed = row
                key = (scheme, float(q0), float(tau), float(gamma), int(n_runs), int(seed))
                cells.setdefault(key, {})[metric] = float(value)
        finally:
            if isinstance(path_or_fh, (str, Path)):
                fh.close()
        rows = []
        for (scheme, q0, tau, gamma, n_runs, seed), vals in cells.items():
            filled = {m: vals.get(m, math.nan) for m in METRICS}
            rows.append(CellResult(scheme, q0, tau, gamma, n_runs, seed, **filled))
        return cls(rows)


def sweep(net: ActivityNetwork, config: SweepConfig, threads: int = 1,
          progress: Callable[[int, int, CellResult], None] | None = None) -> ResultsTable:
    """Every (scheme, q0, tau_tilde, gamma) cell, in a fixed row order."""
    engine = SizeEngine(net, config.master_seed, threads)
    cells = [(s, q, t, g) for t in config.tau_tilde for q in config.q0
             for g in config.gamma for s in config.schemes]
    table = ResultsTable()
    last = None
    for n, (s, q, t, g) in enumerate(cells, 1):
        params = CascadeParams(q, t)
        if last is not None and last != params:
            engine._unmitigated.clear()  # only the current (q0, tau) is reused
        last = params
        row = evaluate_cell(engine, MitigationScheme(s, config.date_order), params, g,
                            config.runs_for(t), ratio=config.ratio,
                            exclude_trivial=config.exclude_trivial)
        table.rows.append(row)
        if progress:
            progress(n, len(cells), row)
    return table


def _scheme_rank(name: str):
    return (SCHEMES.index(name), name) if name in SCHEMES else (len(SCHEMES), name)


@dataclass
class BestSchemeMap:
    metric: str
    threshold: float
    cells: dict  # (tau_tilde, q0, gamma) -> scheme name or UNSPECIFIED

    def to_csv(self, path_or_fh) -> None:
        fh = open(path_or_fh, "w", newline="", encoding="utf-8") if isinstance(path_or_fh, (str, Path)) else path_or_fh
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BESTMAP_HEADER)
            for (t, q, g) in sorted(self.cells):
                w.writerow([self.metric, repr(t), repr(q), repr(g), self.cells[(t, q, g)]])
        finally:
            if isinstance(path_or_fh, (str, Path)):
                fh.close()


def best_scheme_map(table: ResultsTable | Iterable[CellResult], metric: str = "R1",
                    threshold: float = 0.01) -> BestSchemeMap:
    """Winning scheme per (tau_tilde, q0, gamma) cell, or UNSPECIFIED.

    A cell is UNSPECIFIED when ``(worst - best) / worst < threshold``.
    Exact ties for the minimum go to the scheme listed first in SCHEMES.
    """
    if metric not in ("R1", "R2"):
        raise ValueError(f"metric must be R1 or R2, got {metric!r}")
    rows = table.rows if isinstance(table, ResultsTable) else list(table)
    by_cell: dict = {}
    for r in rows:
        by_cell.setdefault(r.cell, {})[r.scheme] = getattr(r, metric)
    schemes = sorted({r.scheme for r in rows}, key=_scheme_rank)
    if len(schemes) < 2:
        raise ValueError("need at least two schemes to pick a best one")
    missing = [(c, [s for s in schemes if s not in v]) for c, v in sorted(by_cell.items())
               if len(v) < len(schemes)]
    if missing:
        raise IncompleteTableError(missing)
    out = {}
    for cell, vals in by_cell.items():
        best = min(schemes, key=lambda s: (vals[s], _scheme_rank(s)))
        b, w = vals[best], max(vals.values())
        out[cell] = UNSPECIFIED if (w - b) / w < threshold else best
    return BestSchemeMap(metric, threshold, out)


def read_bestmap_csv(path) -> BestSchemeMap:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cells, metric = {}, None
        for row in reader:
            metric = row["metric"]
            cells[(float(row["tau_tilde"]), float(row["q0"]), float(row["gamma"]))] = row["best_scheme"]
    return BestSchemeMap(metric or "R1", math.nan, cells)
