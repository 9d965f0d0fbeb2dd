"""Float-damped independent cascade on an activity network.

A failed upstream task ``i`` makes its successor ``j`` fail with probability
``q0 * exp(-float_ij / tau_tilde)``, independently across predecessors.
Nodes are finalised in topological order, each with a single uniform draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .rng import CASCADE, RngStream, row_width, stream_key
from .schedule import ActivityNetwork

MAX_ORACLE_EDGES = 20


class CapacityError(ValueError):
    pass


@dataclass(frozen=True)
class CascadeParams:
    q0: float
    tau_tilde: float

    def __post_init__(self):
        if not 0.0 <= self.q0 <= 1.0:
            raise ValueError(f"q0 must lie in [0, 1], got {self.q0}")
        if not self.tau_tilde > 0:
            raise ValueError(f"tau_tilde must be positive, got {self.tau_tilde}")


@dataclass(frozen=True)
class CascadeOutcome:
    seed: str
    states: dict[str, int]

    @property
    def size(self) -> int:
        return sum(self.states.values())

    @property
    def affected(self) -> set[str]:
        return {k for k, s in self.states.items() if s}


def propagation_probability(params: CascadeParams, tau: float) -> float:
    if tau < 0:
        raise ValueError(f"free float must be non-negative, got {tau}")
    return params.q0 * math.exp(-tau / params.tau_tilde)


def node_failure_probability(upstream: Iterable[tuple[int, float]]) -> float:
    """Probability that a node fails given ``(state, p)`` for each predecessor."""
    keep = 1.0
    for s, p in upstream:
        if s not in (0, 1):
            raise ValueError(f"state must be 0 or 1, got {s}")
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"probability outside [0, 1]: {p}")
        if s:
            keep *= 1.0 - p
    return 1.0 - keep


def run_cascade(net: ActivityNetwork, seed: str, params: CascadeParams,
                rng: RngStream | None = None, order: Sequence[str] | None = None) -> CascadeOutcome:
    """Single cascade realisation (reference implementation).

    ``order`` may be any topological order; by default the network's own.
    Every node reads the same uniform regardless of order, so the outcome
    does not depend on it.
    """
    s = net.node(seed)
    if rng is None:
        rng = RngStream(0, s)
    u = rng.cascade_uniforms(net.n_nodes)
    state = np.zeros(net.n_nodes, dtype=np.int8)
    state[s] = 1
    idx = net.topo_index.tolist() if order is None else [net.node(t) for t in order]
    for j in idx:
        if j == s:
            continue
        upstream = []
        for e in net.pred_edge[net.pred_ptr[j]:net.pred_ptr[j + 1]].tolist():
            i = int(net.src[e])
            upstream.append((int(state[i]), propagation_probability(params, int(net.starts[j] - net.ends[i]))))
        if u[j] < node_failure_probability(upstream):
            state[j] = 1
    return CascadeOutcome(seed, dict(zip(net.ids, state.tolist())))


def cascade_sizes(net: ActivityNetwork, seed: str | int, params: CascadeParams,
                  runs: range | int, master_seed: int = 0) -> np.ndarray:
    """Cascade sizes for the given run indices, via the compiled kernel."""
    s = seed if isinstance(seed, (int, np.integer)) else net.node(seed)
    if isinstance(runs, int):
        runs = range(runs)
    comp = net.out_component_index(s)
    return _kernels.cascade_sizes(s, comp, net.pred_ptr, net.pred_edge, net.src,
                                  net.starts, net.ends, float(params.q0),
                                  float(params.tau_tilde), stream_key(master_seed, s, CASCADE),
                                  row_width(net.n_nodes), runs.start, len(runs))


def mean_cascade_size(net: ActivityNetwork, seed: str, params: CascadeParams,
                      n_runs: int, master_seed: int = 0) -> float:
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    return float(cascade_sizes(net, seed, params, n_runs, master_seed).mean())


def exact_cascade_expectation(net: ActivityNetwork, seed: str, params: CascadeParams) -> float:
    """Expected cascade size by enumerating live/dead states of every edge.

    Uses the edge-percolation picture: each edge is independently live with
    its transmission probability and the cascade is the set reachable from
    the seed over live edges. Only edges inside the seed's out-component
    (plus the seed) matter.
    """
    s = net.node(seed)
    comp = net.out_component_index(s).tolist()
    inside = set(comp) | {s}
    edges = [e for e in range(net.n_edges)
             if int(net.src[e]) in inside and int(net.dst[e]) in inside]
    if len(edges) > MAX_ORACLE_EDGES:
        raise CapacityError(
            f"{len(edges)} edges downstream of {seed}; enumeration limited to {MAX_ORACLE_EDGES}")
    if not edges:
        return 1.0
    n_e = len(edges)
    masks = np.arange(1 << n_e, dtype=np.int64)
    live = ((masks[:, None] >> np.arange(n_e)) & 1).astype(bool)
    p = np.array([propagation_probability(params, int(net.floats[e])) for e in edges])
    weight = np.prod(np.where(live, p, 1.0 - p), axis=1)

    reached = {s: np.ones(len(masks), dtype=bool)}
    incoming: dict[int, list[int]] = {}
    for col, e in enumerate(edges):
        incoming.setdefault(int(net.dst[e]), []).append(col)
    total = np.ones(len(masks))
    for j in comp:
        r = np.zeros(len(masks), dtype=bool)
        for col in incoming.get(j, ()):
            r |= reached[int(net.src[edges[col]])] & live[:, col]
        reached[j] = r
        total += r
    return float(weight @ total)
