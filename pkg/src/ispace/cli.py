"""Command-line entry point: ``ispace run|validate|embed|trace``.

Exit codes: 0 on success, 1 when the model file is missing or invalid, 2 when
the simulation itself fails. Diagnostics go to standard error as
``error[code]: message``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .engine import EngineConfig, run
from .errors import ISpaceError, ValidationError
from .io import export_causal_trace, parse_model_file, write_model_file, write_trajectory

log = logging.getLogger("ispace")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _fail(code: str, message: str, status: int) -> int:
    print(f"error[{code}]: {message}", file=sys.stderr)
    return status


def _load(path: str):
    try:
        return parse_model_file(Path(path))
    except FileNotFoundError:
        raise _Exit(_fail("missing-file", f"no such model file: {path}", 1))
    except IsADirectoryError:
        raise _Exit(_fail("missing-file", f"not a file: {path}", 1))
    except ValidationError as exc:
        raise _Exit(_fail(exc.code, f"{path}: {exc}", 1))


class _Exit(Exception):
    def __init__(self, status: int):
        self.status = status


def _seed_range(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    if not sep:
        raise argparse.ArgumentTypeError("expected a..b")
    return list(range(int(lo), int(hi) + 1))


def _per_seed(path: str, seed: int) -> str:
    if "{seed}" in path:
        return path.format(seed=seed)
    p = Path(path)
    return str(p.with_name(f"{p.stem}.seed{seed}{p.suffix}"))


def _simulate(model, config, seed, horizon, out, fmt, trace_out):
    traj, trace = run(model, seed, horizon, config)
    if out == "-":
        write_trajectory(traj, fmt, sys.stdout)
    else:
        write_trajectory(traj, fmt, out)
    if trace_out:
        export_causal_trace(trace, model, "dot" if trace_out.endswith(".dot") else "jsonl", trace_out)


def cmd_run(args) -> int:
    model, config = _load(args.model)
    horizon = args.horizon if args.horizon is not None else config.horizon
    if args.seeds:
        if args.out == "-":
            return _fail("usage", "--seeds needs --out naming a file", 1)
        jobs = [(s, _per_seed(args.out, s), _per_seed(args.trace, s) if args.trace else None) for s in args.seeds]
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_simulate, model, config, s, horizon, out, args.format, tr)
                       for s, out, tr in jobs]
            for f in futures:
                f.result()
        return 0
    _simulate(model, config, args.seed, horizon, args.out, args.format, args.trace)
    return 0


def cmd_validate(args) -> int:
    model, _ = _load(args.model)
    print(f"ok: {len(model.entities)} entities, {len(model.interactions)} interactions")
    return 0


def cmd_trace(args) -> int:
    model, config = _load(args.model)
    horizon = args.horizon if args.horizon is not None else config.horizon
    _, trace = run(model, args.seed, horizon, config)
    if args.dot:
        export_causal_trace(trace, model, "dot", args.dot)
    if args.jsonl:
        export_causal_trace(trace, model, "jsonl", args.jsonl)
    if not args.dot and not args.jsonl:
        sys.stdout.write(export_causal_trace(trace, model, "jsonl"))
    return 0


def _json_arg(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"invalid JSON: {exc.msg}") from None


PATTERNS = {
    "blinker": [(0, -1), (0, 0), (0, 1)],
    "glider": [(-1, 0), (0, 1), (1, -1), (1, 0), (1, 1)],
    "block": [(0, 0), (0, 1), (1, 0), (1, 1)],
    "empty": [],
}


def make_grid(rows: int, cols: int, pattern: str, density: float = 0.3, seed: int = 0):
    """Grid with ``pattern`` centred (or random cells alive with ``density``)."""
    if pattern == "random":
        rng = np.random.default_rng(seed)
        return [[int(v) for v in row] for row in (rng.random((rows, cols)) < density)]
    grid = [[0] * cols for _ in range(rows)]
    for dr, dc in PATTERNS[pattern]:
        grid[(rows // 2 + dr) % rows][(cols // 2 + dc) % cols] = 1
    return grid


def cmd_embed(args) -> int:
    from . import embeddings as emb
    from .transitions import Linear, Logistic

    if args.kind == "ode":
        A = args.matrix
        model = emb.embed_ode(emb.OdeSystem(Linear(A, args.offset or ()), tuple(args.x0)), tuple(args.span), args.h)
    elif args.kind == "map":
        fn = Logistic(args.logistic) if args.logistic is not None else Linear(args.matrix, args.offset or ())
        model = emb.embed_discrete_map(emb.DiscreteMap(fn, tuple(args.x0), args.steps))
    elif args.kind == "ca":
        grid = args.grid or make_grid(args.rows, args.cols, args.pattern, args.density, args.seed)
        mode = "async" if args.async_rate else "sync"
        model = emb.embed_ca(emb.CaSpec(grid, args.rule, args.generations, torus=not args.no_torus,
                                        mode=mode, rate=args.async_rate or 1.0))
    else:
        nodes = [str(i) for i in range(args.nodes)]
        if args.graph == "path":
            edges = [(nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1)]
        elif args.graph == "ring":
            edges = [(nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]
        else:
            edges = [(u, v) for i, u in enumerate(nodes) for v in nodes[i + 1:]]
        x0 = args.x0 if args.x0 is not None else list(np.random.default_rng(args.seed).random(len(nodes)))
        changes = [(int(s), u, v, 0) for u, v, s in args.remove_edge or ()]
        changes += [(int(s), u, v, 1) for u, v, s in args.add_edge or ()]
        model = emb.embed_network(emb.NetworkSpec(nodes, {v: float(x) for v, x in zip(nodes, x0)}, tuple(edges),
                                                  args.steps, tuple(changes),
                                                  schedule="async" if args.async_rate else "sync",
                                                  rate=args.async_rate or 1.0))
    write_model_file(model, args.emit, EngineConfig(horizon=model.t_end, micro_step=args.micro_step))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ispace", description="Simulate interaction-space models.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a model file and write its trajectory")
    r.add_argument("model")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--seeds", type=_seed_range, help="run seeds a..b concurrently, one output file each")
    r.add_argument("--jobs", type=int, default=4)
    r.add_argument("--horizon", type=float)
    r.add_argument("--out", default="-")
    r.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    r.add_argument("--trace", help="also write the causal trace (.dot or .jsonl)")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("model")
    v.set_defaults(func=cmd_validate)

    t = sub.add_parser("trace", help="simulate and export the causal trace")
    t.add_argument("model")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--horizon", type=float)
    t.add_argument("--dot")
    t.add_argument("--jsonl")
    t.set_defaults(func=cmd_trace)

    e = sub.add_parser("embed", help="write a model file for a classical model")
    e.add_argument("kind", choices=("ode", "map", "ca", "network"))
    e.add_argument("--emit", required=True)
    e.add_argument("--micro-step", type=float)
    e.add_argument("--matrix", type=_json_arg, default=[[-1.0]], help="linear right-hand side / map matrix")
    e.add_argument("--offset", type=_json_arg)
    e.add_argument("--x0", type=_json_arg)
    e.add_argument("--span", type=float, nargs=2, default=(0.0, 1.0))
    e.add_argument("--h", type=float, default=1e-3)
    e.add_argument("--logistic", type=float)
    e.add_argument("--steps", type=int, default=10)
    e.add_argument("--rows", type=int, default=10)
    e.add_argument("--cols", type=int, default=10)
    e.add_argument("--pattern", choices=sorted(PATTERNS) + ["random"], default="blinker")
    e.add_argument("--density", type=float, default=0.3)
    e.add_argument("--grid", type=_json_arg)
    e.add_argument("--rule", default="B3/S23")
    e.add_argument("--generations", type=int, default=20)
    e.add_argument("--no-torus", action="store_true")
    e.add_argument("--async-rate", type=float)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--nodes", type=int, default=10)
    e.add_argument("--graph", choices=("path", "ring", "complete"), default="path")
    e.add_argument("--remove-edge", nargs=3, action="append", metavar=("U", "V", "STEP"))
    e.add_argument("--add-edge", nargs=3, action="append", metavar=("U", "V", "STEP"))
    e.set_defaults(func=cmd_embed)
    return p


def main(argv: list[str] | None = None) -> int:
    level = os.environ.get("IS_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=_LEVELS.get(level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "embed" and args.x0 is None and args.kind in ("ode", "map"):
        args.x0 = [1.0] if args.kind == "ode" else [0.4]
    try:
        return args.func(args)
    except _Exit as exc:
        return exc.status
    except ValidationError as exc:
        return _fail(exc.code, str(exc), 1)
    except ISpaceError as exc:
        return _fail(exc.code, str(exc), 2)
    except ValueError as exc:
        return _fail("usage", str(exc), 1)
    except OSError as exc:
        return _fail("io", str(exc), 2)


if __name__ == "__main__":
    sys.exit(main())
