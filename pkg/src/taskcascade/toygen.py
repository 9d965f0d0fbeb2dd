"""Small generated networks used as fixtures and for property tests."""

from __future__ import annotations

import numpy as np

from .schedule import ActivityNetwork, Task


class GenerationError(ValueError):
    pass


def fig3() -> ActivityNetwork:
    """Seven-task worked example: v1 feeds two chains v2-v3-v4 and v5-v6-v7.

    Durations, start dates and end dates are pairwise distinct, so only the
    out-degree and out-component schemes see ties. Ranking by out-degree
    puts {v2, v3, v5, v6} (one successor each) ahead of the sinks v4, v7.
    """
    tasks = [
        Task("v1", 0, 10), Task("v2", 15, 24), Task("v3", 30, 42), Task("v4", 50, 57),
        Task("v5", 12, 20), Task("v6", 28, 34), Task("v7", 45, 58),
    ]
    edges = [("v1", "v2"), ("v2", "v3"), ("v3", "v4"),
             ("v1", "v5"), ("v5", "v6"), ("v6", "v7")]
    return ActivityNetwork(tasks, edges)


def chain(n: int = 3, duration: int = 5, gap: int = 2) -> ActivityNetwork:
    if n < 1 or duration < 1 or gap < 0:
        raise GenerationError("chain needs n >= 1, duration >= 1 and gap >= 0")
    width = len(str(n))
    tasks, t = [], 0
    for k in range(n):
        tasks.append(Task(f"t{k:0{width}d}", t, t + duration))
        t += duration + gap
    ids = [x.id for x in tasks]
    return ActivityNetwork(tasks, list(zip(ids, ids[1:])))


def diamond(duration: int = 5, gap: int = 2) -> ActivityNetwork:
    if duration < 1 or gap < 0:
        raise GenerationError("diamond needs duration >= 1 and gap >= 0")
    step = duration + gap
    tasks = [Task("a", 0, duration), Task("b", step, step + duration),
             Task("c", step, step + duration), Task("d", 2 * step, 2 * step + duration)]
    return ActivityNetwork(tasks, [("a", "b"), ("a", "c"), ("b", "d"), ("c", "d")])


def random_dag(n: int = 30, edge_prob: float = 0.1, horizon: int = 100,
               max_duration: int = 10, seed: int = 0, max_edges: int | None = None,
               project_slack: int = 0) -> ActivityNetwork:
    """Random tasks on ``[0, horizon)``; each time-compatible pair is linked
    with probability ``edge_prob`` (optionally capped at ``max_edges``)."""
    if n < 1:
        raise GenerationError("n must be positive")
    if not 0.0 <= edge_prob <= 1.0:
        raise GenerationError("edge_prob must lie in [0, 1]")
    if max_duration < 1 or horizon <= max_duration:
        raise GenerationError("horizon must exceed max_duration >= 1")
    rng = np.random.default_rng(seed)
    starts = rng.integers(0, horizon - max_duration, size=n)
    ends = starts + rng.integers(1, max_duration + 1, size=n)
    width = len(str(n - 1))
    ids = [f"n{k:0{width}d}" for k in range(n)]
    cand = [(i, j) for i in range(n) for j in range(n) if i != j and ends[i] <= starts[j]]
    keep = rng.random(len(cand)) < edge_prob
    edges = [(ids[i], ids[j]) for (i, j), k in zip(cand, keep) if k]
    if max_edges is not None and len(edges) > max_edges:
        pick = np.sort(rng.choice(len(edges), size=max_edges, replace=False))
        edges = [edges[k] for k in pick]
    tasks = [Task(ids[k], int(starts[k]), int(ends[k])) for k in range(n)]
    return ActivityNetwork(tasks, edges, int(ends.max()) + project_slack)


GENERATORS = {"fig3": fig3, "chain": chain, "diamond": diamond, "random-dag": random_dag}
