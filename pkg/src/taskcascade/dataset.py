"""Adapter from loosely formatted raw schedule exports to the canonical CSVs.

Raw exports differ in delimiter, header names and date format, so the
reader sniffs the delimiter, matches columns by name when a header is
present (falling back to position), and accepts either integer day numbers
or calendar dates. Dates become day offsets from the earliest start.
"""

from __future__ import annotations

import csv
import logging
from datetime import date, datetime
from pathlib import Path

from .schedule import ActivityNetwork, Edge, ParseError, Task

log = logging.getLogger(__name__)

DATE_FORMATS = (
    "%Y-%m-%d", "%d/%m/%Y", "%m/%d/%Y", "%Y/%m/%d", "%d-%m-%Y", "%d.%m.%Y",
    "%d-%b-%Y", "%d %b %Y", "%d-%b-%y", "%d/%m/%y", "%m/%d/%y",
    "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%d/%m/%Y %H:%M", "%d/%m/%Y %H:%M:%S",
)

_ID_NAMES = ("task_id", "id", "task", "node", "activity", "name")
_START_NAMES = ("start_day", "start", "start_date", "begin", "planned_start")
_END_NAMES = ("end_day", "end", "end_date", "finish", "finish_date", "planned_finish")
_SRC_NAMES = ("source_id", "source", "from", "pred", "predecessor", "i")
_DST_NAMES = ("target_id", "target", "to", "succ", "successor", "j")


def _read_table(path, names=(), day_columns=False) -> tuple[list[str] | None, list[tuple[int, list[str]]]]:
    text = Path(path).read_text(encoding="utf-8-sig")
    sample = text[:8192]
    try:
        dialect = csv.Sniffer().sniff(sample, delimiters=",;\t| ")
    except csv.Error:
        dialect = csv.excel
    rows = []
    for n, row in enumerate(csv.reader(text.splitlines(), dialect), 1):
        row = [c.strip() for c in row if c.strip() != ""] if dialect.delimiter == " " else [c.strip() for c in row]
        if row and any(row):
            rows.append((n, row))
    if not rows:
        raise ParseError("empty file", None, str(path))
    first = rows[0][1]
    norm = [c.lower().replace(" ", "_") for c in first]
    if any(c in names for c in norm):
        has_header = True
    elif day_columns:
        # a task row always ends in a day number or a date
        has_header = not (_looks_numeric(first[-1]) or _parse_date(first[-1]))
    else:
        has_header = False
    if has_header:
        return norm, rows[1:]
    return None, rows


def _looks_numeric(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _parse_date(s: str, fmt: str | None = None):
    for f in (fmt,) if fmt else DATE_FORMATS:
        try:
            return datetime.strptime(s, f).date()
        except ValueError:
            continue
    return None


def _column(header, names, fallback):
    if header:
        for name in names:
            if name in header:
                return header.index(name)
        for k, h in enumerate(header):
            if any(name in h for name in names[1:3]):
                return k
    return fallback


def _day_parser(values: list[str]):
    """Pick one parser (integer days or a single date format) valid for all values."""
    if all(_looks_numeric(v) and float(v) == int(float(v)) for v in values):
        return lambda v: int(float(v)), "integer days"
    for fmt in DATE_FORMATS:
        try:
            for v in values:
                datetime.strptime(v, fmt)
        except ValueError:
            continue
        return (lambda v, f=fmt: datetime.strptime(v, f).date().toordinal()), fmt
    bad = next(v for v in values if _parse_date(v) is None and not _looks_numeric(v))
    raise ParseError(f"unrecognised day value {bad!r}")


def load_raw(tasks_path, edges_path, convention: str = "auto",
             project_end: int | None = None) -> tuple[ActivityNetwork, dict]:
    """Build a network from raw task and dependency exports.

    ``convention`` picks how a raw (start, end) pair maps to the half-open
    interval used internally: ``exclusive`` keeps ``end`` as is, ``inclusive``
    treats ``end`` as the last working day (so ``end + 1``), and ``auto``
    chooses inclusive only when some raw task has ``end == start``.
    """
    if convention not in ("auto", "exclusive", "inclusive"):
        raise ValueError(f"unknown duration convention {convention!r}")
    header, rows = _read_table(tasks_path, _ID_NAMES + _START_NAMES + _END_NAMES, day_columns=True)
    ci, cs, ce = (_column(header, _ID_NAMES, 0), _column(header, _START_NAMES, 1),
                  _column(header, _END_NAMES, 2))
    for n, row in rows:
        if len(row) <= max(ci, cs, ce):
            raise ParseError("too few columns", n, str(tasks_path))
    start_of, fmt = _day_parser([r[cs] for _, r in rows] + [r[ce] for _, r in rows])
    raw = [(r[ci], start_of(r[cs]), start_of(r[ce]), n) for n, r in rows]

    if convention == "auto":
        convention = "inclusive" if any(e == s for _, s, e, _ in raw) else "exclusive"
    shift = 1 if convention == "inclusive" else 0
    t0 = min(s for _, s, _, _ in raw)
    tasks = []
    for tid, s, e, n in raw:
        try:
            tasks.append(Task(tid, s - t0, e - t0 + shift))
        except ValueError as exc:
            raise ParseError(str(exc), n, str(tasks_path)) from None

    eheader, erows = _read_table(edges_path, _SRC_NAMES[:-1] + _DST_NAMES[:-1])
    a, b = _column(eheader, _SRC_NAMES, 0), _column(eheader, _DST_NAMES, 1)
    edges = []
    for n, row in erows:
        if len(row) <= max(a, b):
            raise ParseError("too few columns", n, str(edges_path))
        edges.append(Edge(row[a], row[b]))
    net = ActivityNetwork(tasks, edges, project_end)
    report = {
        "day_format": fmt,
        "duration_convention": convention,
        "origin": date.fromordinal(t0).isoformat() if fmt != "integer days" else t0,
        "n_tasks": net.n_nodes,
        "n_edges": net.n_edges,
    }
    log.info("converted %s", report)
    return net, report
