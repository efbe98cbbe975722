"""Command line for clustering runs: ``udbgl run|grid|ablate|synth``.

Exit codes: 0 success, 2 invalid config or arguments, 3 solver failure.
``UDBGL_THREADS`` caps worker processes for grid sweeps.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .dataset import MultiViewDataset, load_views, synth_blobs, write_views
from .graphs import dump_graph_csv, sample_component_labels
from .metrics import acc, nmi, purity
from .numerics import QPConvergenceError
from .solver import VARIANTS, RankTargetError, SolverConfig, fit

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

_SOLVER_KEYS = (
    "c", "alpha", "beta", "m", "K", "outer_max_iter", "outer_tol",
    "gamma0", "gamma_min", "gamma_max", "p_inner_max",
    "qp_tol", "qp_max_iter", "seed", "normalize",
    "delta_warm_start", "gamma_reset",
)
_TOP_KEYS = set(_SOLVER_KEYS) | {"manifest", "synth", "out_dir", "dump_consensus", "grid"}


class ConfigError(ValueError):
    pass


def _load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _dataset_from_config(raw, base):
    has_manifest = "manifest" in raw
    has_synth = "synth" in raw
    if has_manifest == has_synth:
        raise ConfigError("config needs exactly one of 'manifest' or 'synth'")
    if has_manifest:
        try:
            return load_views(Path(base) / raw["manifest"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"bad dataset: {exc}") from exc
    g = raw["synth"]
    if not isinstance(g, dict):
        raise ConfigError("synth block must be an object")
    try:
        return synth_blobs(
            n=g["n"], c=g["c"], n_views=g.get("views", 1),
            dims=g.get("dims"), noise=g.get("noise", 0.1), seed=g.get("seed", 0),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad synth block: {exc}") from exc


def _solver_config(raw, ds):
    fields = {k: raw[k] for k in _SOLVER_KEYS if k in raw}
    if "c" not in fields:
        if "synth" in raw and isinstance(raw["synth"], dict) and "c" in raw["synth"]:
            fields["c"] = raw["synth"]["c"]
        else:
            raise ConfigError("config must set 'c'")
    try:
        cfg = SolverConfig(**fields)
        cfg.validate(n=ds.n)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def _metrics_block(pred, truth):
    if truth is None:
        return None
    return {
        "nmi": nmi(pred, truth),
        "acc": acc(pred, truth),
        "purity": purity(pred, truth),
    }


def _component_block(p):
    _, n_sample, n_anchor_only = sample_component_labels(p)
    return {
        "total": n_sample + n_anchor_only,
        "sample_bearing": n_sample,
        "anchor_only": n_anchor_only,
    }


def _write_run_outputs(out_dir, labels, state, cfg, raw, ds, variant, extra_timings):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels_path = out_dir / "labels.csv"
    np.savetxt(labels_path, labels, fmt="%d")
    timings = dict(state.timings)
    timings.update(extra_timings)
    report = {
        "config": {**{k: raw.get(k) for k in _TOP_KEYS if k in raw}, "resolved": asdict(cfg)},
        "variant": variant,
        "labels_path": labels_path.name,
        "n": ds.n,
        "metrics": _metrics_block(labels, ds.labels),
        "objective_trace": [float(v) for v in state.objective_trace],
        "iterations": state.iterations,
        "gamma": state.gamma,
        "delta": [float(v) for v in state.delta],
        "components": _component_block(state.p),
        "timings": timings,
    }
    if raw.get("dump_consensus"):
        dump_graph_csv(state.p, out_dir / "consensus_graph.csv")
        report["consensus_path"] = "consensus_graph.csv"
    with open(out_dir / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    return report


def _run_once(raw, config_dir, out_dir, variant):
    t0 = time.perf_counter()
    ds = _dataset_from_config(raw, config_dir)
    cfg = _solver_config(raw, ds)
    load_time = time.perf_counter() - t0
    labels, state = fit(ds, cfg, variant=variant)
    report = _write_run_outputs(out_dir, labels, state, cfg, raw, ds, variant,
                                {"load": load_time})
    return report


def cmd_run(args):
    raw = _load_config(args.config)
    out_dir = args.out or raw.get("out_dir", ".")
    report = _run_once(raw, Path(args.config).parent, out_dir, "full")
    met = report["metrics"]
    tail = "" if met is None else f"  nmi={met['nmi']:.4f} acc={met['acc']:.4f}"
    print(f"run: {report['iterations']} iterations, "
          f"{report['components']['sample_bearing']} clusters{tail}")
    return EXIT_OK


def cmd_ablate(args):
    raw = _load_config(args.config)
    out_dir = args.out or raw.get("out_dir", ".")
    report = _run_once(raw, Path(args.config).parent, out_dir, args.variant)
    met = report["metrics"]
    tail = "" if met is None else f"  nmi={met['nmi']:.4f}"
    print(f"ablate[{args.variant}]: {report['iterations']} iterations{tail}")
    return EXIT_OK


# --- grid mode --------------------------------------------------------------

LOG_GRID = [1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3]


def default_grids(c):
    return {"alpha": list(LOG_GRID), "beta": list(LOG_GRID), "m": [c, 50, 100, 200]}


def grid_cells(raw, c):
    """Deterministic list of (alpha, beta, m) cells from config or the
    default grids (7 x 7 x 4)."""
    grids = default_grids(c)
    grids.update(raw.get("grid", {}) or {})
    return [
        {"alpha": a, "beta": b, "m": int(m)}
        for a, b, m in itertools.product(grids["alpha"], grids["beta"], grids["m"])
    ]


def _subsample(ds, cap, seed):
    if cap is None or ds.n <= cap:
        return ds
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(ds.n, size=cap, replace=False))
    views = [x[:, idx] for x in ds.views]
    labels = None if ds.labels is None else ds.labels[idx]
    return MultiViewDataset(views, labels)


def _grid_cell(task):
    raw, cell, n = task
    merged = {k: v for k, v in raw.items() if k not in ("grid", "out_dir")}
    merged.update(cell)
    row = dict(cell)
    if cell["m"] > n:
        row.update({"skipped": f"m={cell['m']} exceeds n={n}"})
        return row
    try:
        ds = _dataset_from_config(merged, merged.pop("_base", "."))
        ds = _subsample(ds, merged.pop("_cap", None), merged.get("seed", 0))
        cfg = _solver_config(merged, ds)
        labels, state = fit(ds, cfg)
        row.update({
            "metrics": _metrics_block(labels, ds.labels),
            "objective": float(state.objective_trace[-1]),
            "iterations": state.iterations,
        })
    except (ConfigError, RankTargetError, QPConvergenceError, ValueError) as exc:
        row.update({"error": str(exc)})
    return row


def cmd_grid(args):
    raw = _load_config(args.config)
    base = str(Path(args.config).parent)
    ds = _dataset_from_config(raw, base)
    cfg = _solver_config(raw, ds)  # validates the base config early
    n_used = min(ds.n, args.subsample) if args.subsample else ds.n
    cells = grid_cells(raw, cfg.c)
    tasks = []
    for cell in cells:
        task_raw = dict(raw)
        task_raw["_base"] = base
        task_raw["_cap"] = args.subsample
        tasks.append((task_raw, cell, n_used))

    workers = int(os.environ.get("UDBGL_THREADS", "1") or "1")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_grid_cell, tasks))
    else:
        rows = [_grid_cell(t) for t in tasks]

    scored = [r for r in rows if r.get("metrics")]
    if scored:
        best = max(scored, key=lambda r: r["metrics"]["nmi"])
    else:
        done = [r for r in rows if "objective" in r]
        if not done:
            print("grid: every cell failed", file=sys.stderr)
            return EXIT_SOLVER
        best = min(done, key=lambda r: r["objective"])

    out_dir = Path(args.out or raw.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "grid_report.json", "w") as fh:
        json.dump({"n_used": n_used, "cells": rows, "best": best}, fh, indent=2)
    met = best.get("metrics")
    tail = f" nmi={met['nmi']:.4f}" if met else f" objective={best['objective']:.4g}"
    print(f"grid: {len(rows)} cells, best alpha={best['alpha']} "
          f"beta={best['beta']} m={best['m']}{tail}")
    return EXIT_OK


def cmd_synth(args):
    dims = None
    if args.dims:
        try:
            dims = [int(v) for v in args.dims.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --dims: {exc}") from exc
    try:
        ds = synth_blobs(n=args.n, c=args.c, n_views=args.views, dims=dims,
                         noise=args.noise, seed=args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    path = write_views(ds, args.out)
    print(path)
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(prog="udbgl",
                                     description="anchor-based multi-view clustering")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="cluster one dataset per a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.set_defaults(func=cmd_run)

    p_grid = sub.add_parser("grid", help="sweep alpha/beta/m and surface the best cell")
    p_grid.add_argument("--config", required=True)
    p_grid.add_argument("--subsample", type=int, default=10000,
                        help="tune on at most this many samples (default 10000)")
    p_grid.add_argument("--out", default=None)
    p_grid.set_defaults(func=cmd_grid)

    p_abl = sub.add_parser("ablate", help="run a reduced variant of the pipeline")
    p_abl.add_argument("--variant", required=True, choices=VARIANTS)
    p_abl.add_argument("--config", required=True)
    p_abl.add_argument("--out", default=None)
    p_abl.set_defaults(func=cmd_ablate)

    p_syn = sub.add_parser("synth", help="write a synthetic blob dataset")
    p_syn.add_argument("--n", type=int, required=True)
    p_syn.add_argument("--c", type=int, required=True)
    p_syn.add_argument("--views", type=int, required=True)
    p_syn.add_argument("--dims", default=None, help="comma list, one per view (default 4s)")
    p_syn.add_argument("--noise", type=float, default=0.1)
    p_syn.add_argument("--seed", type=int, default=0)
    p_syn.add_argument("--out", required=True)
    p_syn.set_defaults(func=cmd_synth)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RankTargetError, QPConvergenceError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
