"""Time-stamped activity networks: parsing, validation and descriptive queries.

Day stamps are integer offsets. A task occupies ``[start, end)`` so that its
duration is ``end - start`` and a successor may start on the day its
predecessor ends (zero free float).
"""

from __future__ import annotations

import csv
import heapq
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

TASK_HEADER = ("task_id", "start_day", "end_day")
EDGE_HEADER = ("source_id", "target_id")


class ScheduleError(ValueError):
    """Base class for invalid schedule input."""


class ParseError(ScheduleError):
    def __init__(self, message: str, line: int | None = None, source: str = ""):
        self.line = line
        where = f"{source}:" if source else ""
        where += f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class CycleError(ScheduleError):
    """The dependency relation contains a directed cycle."""

    def __init__(self, cycle: Sequence[str]):
        self.cycle = tuple(cycle)
        super().__init__("dependency cycle: " + " -> ".join(self.cycle + self.cycle[:1]))


class PrecedenceError(ScheduleError):
    """A task ends after one of its successors starts."""

    def __init__(self, source: str, target: str, end: int, start: int):
        self.edge = (source, target)
        super().__init__(
            f"edge {source} -> {target}: predecessor ends on day {end} "
            f"but successor starts on day {start}"
        )


class UnknownTaskError(LookupError):
    pass


class EdgeNotFoundError(LookupError):
    pass


@dataclass(frozen=True)
class Task:
    id: str
    start: int
    end: int

    def __post_init__(self):
        if self.start < 0:
            raise ScheduleError(f"task {self.id}: negative start day {self.start}")
        if self.end <= self.start:
            raise ScheduleError(
                f"task {self.id}: end day {self.end} must be after start day {self.start}"
            )

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Edge:
    source: str
    target: str

    def __post_init__(self):
        if self.source == self.target:
            raise ScheduleError(f"self-loop on task {self.source}")


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=np.int64)
    a.setflags(write=False)
    return a


class ActivityNetwork:
    """Immutable time-stamped DAG of tasks.

    Tasks are stored sorted by id; integer node indices refer to that order
    and are stable for a given task set. The arrays exposed here are
    read-only views, so an instance can be shared between threads.
    """

    def __init__(self, tasks: Iterable[Task], edges: Iterable[Edge | tuple[str, str]],
                 project_end: int | None = None):
        tasks = sorted(tasks, key=lambda t: t.id)
        ids = tuple(t.id for t in tasks)
        index = {tid: k for k, tid in enumerate(ids)}
        if len(index) != len(ids):
            seen = set()
            dup = next(t for t in ids if t in seen or seen.add(t))
            raise ScheduleError(f"duplicate task id {dup}")
        self.ids = ids
        self.index = index
        self.starts = _readonly([t.start for t in tasks])
        self.ends = _readonly([t.end for t in tasks])

        pairs = []
        seen_pairs = set()
        for e in edges:
            e = e if isinstance(e, Edge) else Edge(*e)
            for tid in (e.source, e.target):
                if tid not in index:
                    raise UnknownTaskError(f"edge {e.source} -> {e.target}: unknown task {tid}")
            key = (index[e.source], index[e.target])
            if key in seen_pairs:
                raise ScheduleError(f"duplicate edge {e.source} -> {e.target}")
            seen_pairs.add(key)
            pairs.append(key)
        pairs.sort()
        self.src = _readonly([p[0] for p in pairs])
        self.dst = _readonly([p[1] for p in pairs])

        max_end = int(self.ends.max()) if ids else 0
        self.project_end = max_end if project_end is None else int(project_end)
        if self.project_end < max_end:
            raise ScheduleError(
                f"project end {self.project_end} precedes latest task end {max_end}"
            )
        self._build_adjacency()
        self._check_acyclic()
        self._check_precedence()

    def _build_adjacency(self):
        n = len(self.ids)
        # CSR by source; src/dst are already sorted by (src, dst)
        self.succ_ptr = _readonly(np.searchsorted(self.src, np.arange(n + 1)))
        by_dst = np.lexsort((self.src, self.dst))
        self.pred_edge = _readonly(by_dst)
        self.pred_ptr = _readonly(np.searchsorted(self.dst[by_dst], np.arange(n + 1)))

    def successors(self, k: int) -> np.ndarray:
        return self.dst[self.succ_ptr[k]:self.succ_ptr[k + 1]]

    def predecessors(self, k: int) -> np.ndarray:
        return self.src[self.pred_edge[self.pred_ptr[k]:self.pred_ptr[k + 1]]]

    def _check_acyclic(self):
        order = self._kahn()
        if len(order) == len(self.ids):
            self.__dict__["topo_index"] = _readonly(order)
            return
        # every node left over lies on or downstream of a cycle; walk
        # predecessors inside the leftover set until a node repeats
        left = set(range(len(self.ids))) - set(order)
        node = min(left)
        path, pos = [], {}
        while node not in pos:
            pos[node] = len(path)
            path.append(node)
            node = next(int(p) for p in self.predecessors(node) if int(p) in left)
        cycle = path[pos[node]:][::-1]
        raise CycleError([self.ids[k] for k in cycle])

    def _kahn(self) -> list[int]:
        indeg = np.diff(self.pred_ptr).tolist()
        # ids are sorted, so the node index doubles as the id tie-break key
        heap = [k for k, d in enumerate(indeg) if d == 0]
        heapq.heapify(heap)
        order = []
        while heap:
            k = heapq.heappop(heap)
            order.append(k)
            for j in self.successors(k):
                j = int(j)
                indeg[j] -= 1
                if indeg[j] == 0:
                    heapq.heappush(heap, j)
        return order

    def _check_precedence(self):
        bad = np.nonzero(self.ends[self.src] > self.starts[self.dst])[0]
        if len(bad):
            e = int(bad[0])
            i, j = int(self.src[e]), int(self.dst[e])
            raise PrecedenceError(self.ids[i], self.ids[j], int(self.ends[i]), int(self.starts[j]))

    # -- structural queries -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return _readonly(np.diff(self.succ_ptr))

    @cached_property
    def in_degree(self) -> np.ndarray:
        return _readonly(np.diff(self.pred_ptr))

    @cached_property
    def floats(self) -> np.ndarray:
        """Free float of every edge, aligned with ``src``/``dst``."""
        return _readonly(self.starts[self.dst] - self.ends[self.src])

    @cached_property
    def out_component_sizes(self) -> np.ndarray:
        # reverse topological sweep over bitsets held as python ints
        reach = [0] * self.n_nodes
        for k in reversed(self.topo_index.tolist()):
            r = 0
            for j in self.successors(k):
                j = int(j)
                r |= reach[j] | (1 << j)
            reach[k] = r
        return _readonly([r.bit_count() for r in reach])

    def node(self, task_id: str) -> int:
        try:
            return self.index[task_id]
        except KeyError:
            raise UnknownTaskError(f"unknown task {task_id!r}") from None

    def task(self, task_id: str) -> Task:
        k = self.node(task_id)
        return Task(task_id, int(self.starts[k]), int(self.ends[k]))

    @property
    def tasks(self) -> list[Task]:
        return [Task(t, int(s), int(e)) for t, s, e in zip(self.ids, self.starts, self.ends)]

    @property
    def edges(self) -> list[Edge]:
        return [Edge(self.ids[i], self.ids[j]) for i, j in zip(self.src.tolist(), self.dst.tolist())]

    def out_component_index(self, k: int) -> np.ndarray:
        """Indices reachable from node ``k``, excluding ``k``, in topological order."""
        seen = np.zeros(self.n_nodes, dtype=bool)
        stack = [k]
        while stack:
            u = stack.pop()
            for v in self.successors(u):
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        return self.topo_index[seen[self.topo_index]]

    def with_schedule(self, starts, ends) -> "ActivityNetwork":
        """Copy of this network with new day stamps; all invariants re-checked."""
        starts = np.asarray(starts, dtype=np.int64)
        ends = np.asarray(ends, dtype=np.int64)
        if starts.shape != self.starts.shape or ends.shape != self.ends.shape:
            raise ValueError("schedule arrays must match the number of tasks")
        if (starts < 0).any() or (ends <= starts).any():
            raise ScheduleError("invalid task interval in rescheduled network")
        new = object.__new__(ActivityNetwork)
        new.__dict__.update({k: v for k, v in self.__dict__.items()
                             if k in ("ids", "index", "src", "dst", "succ_ptr", "pred_edge",
                                      "pred_ptr", "project_end", "topo_index", "out_degree",
                                      "in_degree", "out_component_sizes")})
        new.starts = _readonly(starts)
        new.ends = _readonly(ends)
        if int(new.ends.max(initial=0)) > new.project_end:
            raise ScheduleError("rescheduled task ends after the project end")
        new._check_precedence()
        return new

    def __eq__(self, other):
        if not isinstance(other, ActivityNetwork):
            return NotImplemented
        return (self.ids == other.ids and self.project_end == other.project_end
                and np.array_equal(self.starts, other.starts)
                and np.array_equal(self.ends, other.ends)
                and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst))

    __hash__ = None

    def __repr__(self):
        return (f"ActivityNetwork(n_nodes={self.n_nodes}, n_edges={self.n_edges}, "
                f"project_end={self.project_end})")


# -- parsing and serialisation ----------------------------------------------

def _open_text(source) -> tuple[IO[str], str, bool]:
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8"), str(source), True
    return source, getattr(source, "name", ""), False


def _rows(source, header: Sequence[str]):
    fh, name, owned = _open_text(source)
    try:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None or tuple(c.strip() for c in first) != tuple(header):
            raise ParseError(f"expected header {','.join(header)}", 1, name)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}",
                                 reader.line_num, name)
            yield reader.line_num, [c.strip() for c in row], name
    finally:
        if owned:
            fh.close()


def parse_schedule(tasks_source, edges_source, project_end: int | None = None) -> ActivityNetwork:
    """Read a network from the two-file CSV format.

    Both sources may be paths or open text streams.
    """
    tasks = []
    for line, (tid, s, e), name in _rows(tasks_source, TASK_HEADER):
        if not tid:
            raise ParseError("empty task id", line, name)
        try:
            start, end = int(s), int(e)
        except ValueError:
            raise ParseError(f"non-integer day in {s!r},{e!r}", line, name) from None
        try:
            tasks.append(Task(tid, start, end))
        except ScheduleError as exc:
            raise ParseError(str(exc), line, name) from None
    edges = []
    for line, (a, b), name in _rows(edges_source, EDGE_HEADER):
        try:
            edges.append(Edge(a, b))
        except ScheduleError as exc:
            raise ParseError(str(exc), line, name) from None
    return ActivityNetwork(tasks, edges, project_end)


def load_schedule(tasks_path, edges_path, project_end: int | None = None) -> ActivityNetwork:
    return parse_schedule(Path(tasks_path), Path(edges_path), project_end)


def write_schedule(net: ActivityNetwork, tasks_out, edges_out) -> None:
    """Inverse of :func:`parse_schedule` (paths or text streams)."""
    for target, header, rows in (
        (tasks_out, TASK_HEADER, ((t.id, t.start, t.end) for t in net.tasks)),
        (edges_out, EDGE_HEADER, ((e.source, e.target) for e in net.edges)),
    ):
        fh = open(target, "w", newline="", encoding="utf-8") if isinstance(target, (str, Path)) else target
        try:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
        finally:
            if isinstance(target, (str, Path)):
                fh.close()


def serialize_schedule(net: ActivityNetwork) -> tuple[str, str]:
    t, e = io.StringIO(), io.StringIO()
    write_schedule(net, t, e)
    return t.getvalue(), e.getvalue()


# -- queries ------------------------------------------------------------------

def free_float(net: ActivityNetwork, i: str, j: str) -> int:
    """Days between the end of ``i`` and the start of its successor ``j``."""
    a, b = net.node(i), net.node(j)
    if b not in net.successors(a):
        raise EdgeNotFoundError(f"no edge {i} -> {j}")
    return int(net.starts[b] - net.ends[a])


def out_component(net: ActivityNetwork, i: str) -> set[str]:
    return {net.ids[k] for k in net.out_component_index(net.node(i)).tolist()}


def topological_order(net: ActivityNetwork) -> list[str]:
    """Kahn order with ties broken by task id."""
    return [net.ids[k] for k in net.topo_index.tolist()]


@dataclass
class NetworkStats:
    n_nodes: int
    n_edges: int
    in_degree: dict
    out_degree: dict
    inter_event: dict
    duration: dict
    n_in_degree_zero: int
    n_out_degree_zero: int
    span: int
    completion: list[tuple[int, float]] = field(repr=False)

    def rows(self) -> list[tuple[str, object]]:
        """Flat ``(metric, value)`` pairs in a fixed order."""
        out: list[tuple[str, object]] = [("n_nodes", self.n_nodes), ("n_edges", self.n_edges)]
        for name in ("in_degree", "out_degree", "inter_event", "duration"):
            for k, v in getattr(self, name).items():
                out.append((f"{name}_{k}", v))
        out += [
            ("n_in_degree_zero", self.n_in_degree_zero),
            ("n_out_degree_zero", self.n_out_degree_zero),
            ("project_span_days", self.span),
        ]
        return out


def _moments(x: np.ndarray, ddof: int) -> dict:
    if len(x) == 0:
        return {"mean": math.nan, "std": math.nan, "min": math.nan, "max": math.nan}
    return {
        "mean": float(x.mean()),
        "std": float(x.std(ddof=ddof)) if len(x) > ddof else math.nan,
        "min": int(x.min()),
        "max": int(x.max()),
    }


def completion_curve(net: ActivityNetwork) -> list[tuple[int, float]]:
    """Fraction of tasks with ``end <= t`` for every day ``t`` up to the project end."""
    t0 = int(net.starts.min()) if net.n_nodes else 0
    days = np.arange(t0, net.project_end + 1)
    done = np.searchsorted(np.sort(net.ends), days, side="right") / max(net.n_nodes, 1)
    return list(zip(days.tolist(), done.tolist()))


def summary_stats(net: ActivityNetwork, ddof: int = 0) -> NetworkStats:
    """Degree, float and duration moments (population std by default)."""
    t0 = int(net.starts.min()) if net.n_nodes else 0
    return NetworkStats(
        n_nodes=net.n_nodes,
        n_edges=net.n_edges,
        in_degree=_moments(net.in_degree, ddof),
        out_degree=_moments(net.out_degree, ddof),
        inter_event=_moments(net.floats, ddof),
        duration=_moments(net.ends - net.starts, ddof),
        n_in_degree_zero=int((net.in_degree == 0).sum()),
        n_out_degree_zero=int((net.out_degree == 0).sum()),
        span=net.project_end - t0,
        completion=completion_curve(net),
    )


def survival_curve(values) -> list[tuple[int, float]]:
    """Empirical ``P(X >= v)`` at each distinct value ``v``."""
    x = np.sort(np.asarray(list(values) if not isinstance(values, np.ndarray) else values))
    if x.size == 0:
        raise ValueError("survival curve of an empty sample")
    uniq, first = np.unique(x, return_index=True)
    prob = (x.size - first) / x.size
    return [(v.item(), float(p)) for v, p in zip(uniq, prob)]
