"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O or validation
error. Every command writes a JSON manifest next to its output recording
the resolved configuration and the digests of inputs and outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
import time
from pathlib import Path

from . import __version__, toygen
from .cascade import CascadeParams, run_cascade
from .dataset import load_raw
from .experiment import (IncompleteTableError, ResultsTable, SweepConfig,
                         best_scheme_map, default_threads, sweep)
from .mitigation import DATE_ORDERS, SCHEMES, MitigationConfig, MitigationScheme, apply_mitigation
from .rng import RngStream
from .schedule import (ScheduleError, UnknownTaskError, load_schedule, summary_stats,
                       survival_curve, write_schedule)

log = logging.getLogger("taskcascade")


class UsageError(Exception):
    """Bad flags or configuration values (exit code 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    """Comma-separated numbers; an item ``start:stop:step`` expands inclusively."""
    out = []
    try:
        for item in (x.strip() for x in text.split(",")):
            if not item:
                continue
            if ":" in item:
                start, stop, step = (float(x) for x in item.split(":"))
                if step <= 0:
                    raise ValueError
                n = int(math.floor((stop - start) / step + 1e-9))
                # rounding keeps grid points like 0.3 free of accumulated error
                out.extend(round(start + k * step, 12) for k in range(n + 1))
            else:
                out.append(float(item))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated numbers or start:stop:step, got {text!r}") from None
    return out


def _schemes(text: str) -> list[str]:
    names = [x.strip() for x in text.split(",") if x.strip()]
    for n in names:
        if n not in SCHEMES:
            raise argparse.ArgumentTypeError(f"unknown scheme {n!r}; choose from {', '.join(SCHEMES)}")
    return names


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(path: Path, command: str, config: dict, inputs, outputs, started: float,
                    master_seed=None) -> None:
    manifest = {
        "command": command,
        "tool_version": __version__,
        "config": config,
        "master_seed": master_seed,
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": {str(p): _digest(p) for p in outputs},
        "wall_clock_seconds": round(time.time() - started, 3),
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _load_net(args):
    for p in (args.tasks, args.edges):
        if not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")
    return load_schedule(args.tasks, args.edges, getattr(args, "project_end", None))


# -- commands -----------------------------------------------------------------

def cmd_stats(args) -> int:
    started = time.time()
    net = _load_net(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stats = summary_stats(net, ddof=args.ddof)
    files = {"stats.csv": (("metric", "value"), stats.rows())}
    curves = {
        "survival_in_degree.csv": net.in_degree,
        "survival_out_degree.csv": net.out_degree,
        "survival_inter_event.csv": net.floats,
        "survival_duration.csv": net.ends - net.starts,
    }
    for name, values in curves.items():
        if len(values):
            files[name] = (("value", "survival_probability"), survival_curve(values))
    files["completion_by_day.csv"] = (("day", "completed_fraction"), stats.completion)
    written = []
    for name, (header, rows) in files.items():
        _write_rows(out / name, header, rows)
        written.append(out / name)
    _write_manifest(out / "manifest.json", "stats",
                    {"tasks": args.tasks, "edges": args.edges, "project_end": args.project_end,
                     "ddof": args.ddof},
                    [args.tasks, args.edges], written, started)
    for metric, value in stats.rows():
        print(f"{metric},{value}")
    return 0


SWEEP_KEYS = {
    # config key -> (SweepConfig field, parser)
    "q0": ("q0", _floats),
    "tau-tilde": ("tau_tilde", _floats),
    "gamma": ("gamma", _floats),
    "schemes": ("schemes", _schemes),
    "runs": ("n_runs", int),
    "runs-large-tau": ("n_runs_large_tau", int),
    "seed": ("master_seed", int),
    "date-order": ("date_order", str),
    "ratio": ("ratio", str),
    "exclude-trivial-seeds": ("exclude_trivial", lambda s: str(s).lower() in ("1", "true", "yes")),
}


def read_config(path) -> dict:
    """Flat ``key = value`` file, or a manifest written by a previous sweep."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        cfg = json.loads(text).get("config", {}).get("sweep", {})
        return {k: v for k, v in cfg.items()}
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key = value")
        key, value = (x.strip() for x in line.split("=", 1))
        key = key.replace("_", "-")
        if key == "tau":
            key = "tau-tilde"
        if key in ("threads",):
            out["threads"] = int(value)
            continue
        if key not in SWEEP_KEYS:
            raise UsageError(f"{path}:{n}: unknown key {key!r}")
        field_name, parse = SWEEP_KEYS[key]
        try:
            out[field_name] = parse(value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}:{n}: {exc}") from None
    return out


def resolve_sweep_config(args) -> SweepConfig:
    values = {}
    if args.config:
        values.update(read_config(args.config))
    values.pop("threads", None)
    for flag, (field_name, _) in SWEEP_KEYS.items():
        v = getattr(args, flag.replace("-", "_"), None)
        if v is not None:
            values[field_name] = v
    if args.runs is not None and args.runs_large_tau is None:
        values["n_runs_large_tau"] = args.runs
    try:
        return SweepConfig(**values)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def cmd_sweep(args) -> int:
    started = time.time()
    config = resolve_sweep_config(args)
    net = _load_net(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def progress(n, total, row):
        if not args.quiet:
            print(f"\r[{n}/{total}] {row.scheme} q0={row.q0:g} tau={row.tau_tilde:g} "
                  f"gamma={row.gamma:g} R1={row.R1:.4f}", end="", file=sys.stderr, flush=True)

    table = sweep(net, config, threads=args.threads, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    results = out / "results.csv"
    table.to_csv(results)
    _write_manifest(out / "manifest.json", "sweep",
                    {"tasks": args.tasks, "edges": args.edges, "project_end": args.project_end,
                     "sweep": config.to_dict(), "threads": args.threads},
                    [args.tasks, args.edges], [results], started, config.master_seed)
    print(results)
    return 0


def cmd_bestmap(args) -> int:
    started = time.time()
    if not Path(args.results).is_file():
        raise FileNotFoundError(f"no such file: {args.results}")
    if not 0 <= args.threshold:
        raise UsageError("threshold must be non-negative")
    table = ResultsTable.from_csv(args.results)
    bmap = best_scheme_map(table, args.metric, args.threshold)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    bmap.to_csv(out)
    _write_manifest(out.with_name(out.name + ".manifest.json"), "bestmap",
                    {"results": args.results, "metric": args.metric, "threshold": args.threshold,
                     "tie_break_order": list(SCHEMES)},
                    [args.results], [out], started)
    print(out)
    return 0


def cmd_cascade(args) -> int:
    net = _load_net(args)
    try:
        params = CascadeParams(args.q0, args.tau_tilde)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    seed_idx = net.node(args.seed_node)
    stream = RngStream(args.seed, seed_idx, args.run)
    if args.scheme:
        try:
            cfg = MitigationConfig(MitigationScheme(args.scheme, args.date_order), args.gamma)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        before = net
        net = apply_mitigation(net, args.seed_node, cfg, stream)
        for t0, t1 in zip(before.tasks, net.tasks):
            if t0 != t1:
                print(f"postponed {t0.id}: [{t0.start}, {t0.end}) -> [{t1.start}, {t1.end})")
    outcome = run_cascade(net, args.seed_node, params, stream)
    print(f"seed,{outcome.seed}")
    print(f"size,{outcome.size}")
    print("affected," + " ".join(sorted(outcome.affected)))
    return 0


def cmd_toygen(args) -> int:
    started = time.time()
    kw = {}
    if args.kind == "chain":
        kw = dict(n=args.n or 3, duration=args.duration, gap=args.gap)
    elif args.kind == "diamond":
        kw = dict(duration=args.duration, gap=args.gap)
    elif args.kind == "random-dag":
        kw = dict(n=args.n or 30, edge_prob=args.edge_prob, horizon=args.horizon,
                  max_duration=args.max_duration, seed=args.seed)
    try:
        net = toygen.GENERATORS[args.kind](**kw)
    except ValueError as exc:
        raise UsageError(f"cannot generate {args.kind}: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks, edges = out / "tasks.csv", out / "edges.csv"
    write_schedule(net, tasks, edges)
    _write_manifest(out / "manifest.json", "toygen", {"kind": args.kind, **kw}, [],
                    [tasks, edges], started, kw.get("seed"))
    print(f"{net.n_nodes} tasks, {net.n_edges} edges -> {out}")
    return 0


def cmd_convert(args) -> int:
    started = time.time()
    for p in (args.raw_tasks, args.raw_edges):
        if not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")
    net, report = load_raw(args.raw_tasks, args.raw_edges, args.duration_convention,
                           args.project_end)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tasks, edges = out / "tasks.csv", out / "edges.csv"
    write_schedule(net, tasks, edges)
    _write_manifest(out / "manifest.json", "convert",
                    {"duration_convention": args.duration_convention, "report": report},
                    [args.raw_tasks, args.raw_edges], [tasks, edges], started)
    for k, v in report.items():
        print(f"{k},{v}")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="taskcascade", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def network_args(sp):
        sp.add_argument("--tasks", required=True, help="tasks CSV (task_id,start_day,end_day)")
        sp.add_argument("--edges", required=True, help="edges CSV (source_id,target_id)")
        sp.add_argument("--project-end", type=int, default=None,
                        help="delivery day; defaults to the latest task end")

    sp = sub.add_parser("stats", help="network statistics and survival curves")
    network_args(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--ddof", type=int, default=0, choices=(0, 1),
                    help="0 for population, 1 for sample standard deviation")
    sp.set_defaults(func=cmd_stats)

    sp = sub.add_parser("sweep", help="R1/R2 over a parameter grid")
    network_args(sp)
    sp.add_argument("--out", required=True)
    sp.add_argument("--config", help="key = value file or a previous manifest.json")
    sp.add_argument("--schemes", type=_schemes)
    sp.add_argument("--q0", type=_floats)
    sp.add_argument("--tau-tilde", type=_floats)
    sp.add_argument("--gamma", type=_floats)
    sp.add_argument("--runs", type=int)
    sp.add_argument("--runs-large-tau", type=int, help="runs for tau_tilde >= 1e4")
    sp.add_argument("--seed", type=int, help="master seed")
    sp.add_argument("--date-order", choices=DATE_ORDERS)
    sp.add_argument("--ratio", choices=("seed-means", "run-ratios"))
    sp.add_argument("--exclude-trivial-seeds", action="store_true", default=None)
    sp.add_argument("--threads", type=int, default=default_threads())
    sp.add_argument("--quiet", action="store_true")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("bestmap", help="best scheme per (tau_tilde, q0, gamma) cell")
    sp.add_argument("--results", required=True)
    sp.add_argument("--metric", choices=("R1", "R2"), default="R1")
    sp.add_argument("--threshold", type=float, default=0.01)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_bestmap)

    sp = sub.add_parser("cascade", help="one cascade realisation from one seed node")
    network_args(sp)
    sp.add_argument("--seed-node", required=True)
    sp.add_argument("--q0", type=float, required=True)
    sp.add_argument("--tau-tilde", type=float, required=True)
    sp.add_argument("--run", type=int, default=0)
    sp.add_argument("--seed", type=int, default=0, help="master seed")
    sp.add_argument("--scheme", choices=SCHEMES)
    sp.add_argument("--gamma", type=float, default=1.0)
    sp.add_argument("--date-order", choices=DATE_ORDERS, default="latest")
    sp.set_defaults(func=cmd_cascade)

    sp = sub.add_parser("toygen", help="write a fixture network")
    sp.add_argument("kind", choices=sorted(toygen.GENERATORS))
    sp.add_argument("--out", required=True)
    sp.add_argument("--n", type=int)
    sp.add_argument("--duration", type=int, default=5)
    sp.add_argument("--gap", type=int, default=2)
    sp.add_argument("--edge-prob", type=float, default=0.1)
    sp.add_argument("--horizon", type=int, default=100)
    sp.add_argument("--max-duration", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_toygen)

    sp = sub.add_parser("convert", help="map raw schedule exports to the canonical CSVs")
    sp.add_argument("--raw-tasks", required=True)
    sp.add_argument("--raw-edges", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--duration-convention", choices=("auto", "exclusive", "inclusive"),
                    default="auto")
    sp.add_argument("--project-end", type=int, default=None)
    sp.set_defaults(func=cmd_convert)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"taskcascade: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ScheduleError, UnknownTaskError, IncompleteTableError) as exc:
        print(f"taskcascade: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # malformed table contents reaching the library
        print(f"taskcascade: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
