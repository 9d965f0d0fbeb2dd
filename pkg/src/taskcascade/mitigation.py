"""Ranking of a failed task's downstream set and single-pass postponement."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import RngStream
from .schedule import ActivityNetwork

# order matters: it is the tie-break order used when classifying best schemes
SCHEMES = ("out-degree", "out-component", "duration", "start-date", "end-date", "random")
DATE_SCHEMES = ("start-date", "end-date")
DATE_ORDERS = ("latest", "earliest")


@dataclass(frozen=True)
class MitigationScheme:
    kind: str
    date_order: str = "latest"

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {', '.join(SCHEMES)}")
        if self.date_order not in DATE_ORDERS:
            raise ValueError(f"date order must be 'latest' or 'earliest', got {self.date_order!r}")

    @property
    def descending(self) -> bool:
        return not (self.kind in DATE_SCHEMES and self.date_order == "earliest")

    def __str__(self):
        return self.kind


@dataclass(frozen=True)
class MitigationConfig:
    scheme: MitigationScheme
    gamma: float

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class RankedSet:
    order: tuple[str, ...]
    scores: tuple[float, ...]
    descending: bool = True

    def __len__(self):
        return len(self.order)


def n_mitigated(gamma: float, n: int) -> int:
    """``gamma * n`` rounded half up (0.67 of 6 gives 4)."""
    # the epsilon absorbs binary representation error, e.g. 0.7 * 5
    return min(n, int(math.floor(gamma * n + 0.5 + 1e-9)))


def scheme_scores(net: ActivityNetwork, kind: str) -> np.ndarray | None:
    """Per-node scores for a deterministic scheme; ``None`` for ``random``."""
    if kind == "out-degree":
        return net.out_degree.astype(float)
    if kind == "out-component":
        return net.out_component_sizes.astype(float)
    if kind == "duration":
        return (net.ends - net.starts).astype(float)
    if kind == "start-date":
        return net.starts.astype(float)
    if kind == "end-date":
        return net.ends.astype(float)
    if kind == "random":
        return None
    raise ValueError(f"unknown scheme {kind!r}")


def score_nodes(net: ActivityNetwork, nodes, scheme: MitigationScheme,
                rng: RngStream) -> RankedSet:
    """Rank ``nodes`` by the scheme's score; ties go in uniformly random order.

    The random draw of each node doubles as its tie-break key, and for the
    ``random`` scheme as its score.
    """
    tie = rng.ranking_uniforms(net.n_nodes)
    scores = scheme_scores(net, scheme.kind)
    if scores is None:
        scores = tie
    sign = -1.0 if scheme.descending else 1.0
    idx = sorted((net.node(t) for t in nodes), key=lambda k: (sign * scores[k], tie[k], k))
    return RankedSet(tuple(net.ids[k] for k in idx), tuple(float(scores[k]) for k in idx),
                     scheme.descending)


def max_postponement(net: ActivityNetwork, task: str) -> int:
    """Largest shift keeping the task before its successors and the delivery date."""
    k = net.node(task)
    end = int(net.ends[k])
    delta = net.project_end - end
    for j in net.successors(k).tolist():
        delta = min(delta, int(net.starts[j]) - end)
    return delta


def postpone_in_order(net: ActivityNetwork, tasks: Sequence[str]) -> list[ActivityNetwork]:
    """Postpone ``tasks`` one after another; returns the network after each step."""
    steps = []
    for t in tasks:
        k = net.node(t)
        d = max_postponement(net, t)
        starts, ends = net.starts.copy(), net.ends.copy()
        starts[k] += d
        ends[k] += d
        net = net.with_schedule(starts, ends)
        steps.append(net)
    return steps


def apply_mitigation(net: ActivityNetwork, seed: str, config: MitigationConfig,
                     rng: RngStream | None = None) -> ActivityNetwork:
    """Postpone the top-ranked fraction of the seed's downstream tasks.

    Works on a copy; successors' already-shifted start dates bound each
    later postponement.
    """
    s = net.node(seed)
    if rng is None:
        rng = RngStream(0, s)
    downstream = [net.ids[k] for k in net.out_component_index(s).tolist()]
    m = n_mitigated(config.gamma, len(downstream))
    if m == 0:
        return net
    ranked = score_nodes(net, downstream, config.scheme, rng)
    return postpone_in_order(net, ranked.order[:m])[-1]
