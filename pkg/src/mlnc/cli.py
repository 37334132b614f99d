"""``mlnc`` command line: train, grid, ablation, bench, synth, eval.

Flags given on the command line override the matching fields of the JSON
config file (``--out`` -> out, ``--seeds`` -> train.seeds,
``--deterministic`` -> train.deterministic).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import checkpoint
from .config import FULL_GRID, ConfigError, ExperimentConfig, load_config, parse_config
from .data import SyntheticSpec, generate_synthetic, make_split, save_dataset, save_split
from .graph import normalize_adjacency
from .metrics import LOWER_IS_BETTER, evaluate
from .models import BACKBONES, build_model
from .report import (results_markdown, write_ablation, write_bench, write_json,
                     write_results_csv)
from .trainer import (TrainingDiverged, measure_efficiency, run_ablation, run_seeds,
                      train_one)

log = logging.getLogger("mlnc")

GRID_CONFIRM_THRESHOLD = 256


def _resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    train = cfg.train
    if getattr(args, "seeds", None):
        train = replace(train, seeds=tuple(int(s) for s in args.seeds.split(",")))
    if getattr(args, "deterministic", False):
        train = replace(train, deterministic=True)
    cfg = replace(cfg, train=train)
    if getattr(args, "out", None):
        cfg = replace(cfg, out=args.out)
    return parse_config(cfg.to_json())


def _out_dir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_run(result, models, cfg: ExperimentConfig, out: Path) -> None:
    write_json(result.to_json(), out / "results.json")
    write_results_csv(result, out / "results.csv")
    (out / "results.md").write_text(results_markdown(result))
    write_json(result.timings(), out / "timings.json")
    checkpoint.save_arrays(models[0].state_dict(), out / "model.ckpt")
    (out / "config.json").write_text(cfg.dumps())


def _print_summary(result) -> None:
    for name, stat in result.summary().items():
        std = "" if stat["std"] is None else f" ± {stat['std']:.2f}"
        print(f"{name:>13}: {stat['mean']:.2f}{std}")


def cmd_train(args) -> int:
    cfg = _resolve(args)
    graph = cfg.load_graph()
    log.info("graph %s", graph.stats())
    result, models = run_seeds(cfg.model, cfg.train, graph, return_models=True)
    out = _out_dir(cfg)
    _write_run(result, models, cfg, out)
    _print_summary(result)
    print(f"wrote {out}")
    return 0


def _grid_point(payload):
    assignment, model_cfg, train_cfg, graph = payload
    seed = train_cfg.seeds[0]
    try:
        _, run = train_one(model_cfg, train_cfg, graph, make_split(graph, seed), seed)
    except (TrainingDiverged, ValueError) as exc:
        return {**assignment, "val": None, "best_epoch": None, "status": "failed",
                "error": str(exc)}
    return {**assignment, "val": run.best_val, "best_epoch": run.best_epoch, "status": "ok",
            "error": ""}


def _estimate_cost(cfg: ExperimentConfig, graph, n_points: int) -> float:
    probe = replace(cfg.train, max_epochs=3, patience=3)
    t0 = time.perf_counter()
    train_one(cfg.model, probe, graph, make_split(graph, probe.seeds[0]), probe.seeds[0])
    per_epoch = (time.perf_counter() - t0) / 3
    return per_epoch * cfg.train.max_epochs * (n_points + len(cfg.train.seeds))


def cmd_grid(args) -> int:
    cfg = _resolve(args)
    if args.full_grid:
        cfg = replace(cfg, grid=dict(FULL_GRID))
    if not cfg.grid:
        raise ConfigError("grid: no grid lists given (use a 'grid' section or --full-grid)")
    points = cfg.grid_points()
    graph = cfg.load_graph()
    if len(points) > GRID_CONFIRM_THRESHOLD or args.full_grid:
        est = _estimate_cost(cfg, graph, len(points))
        print(f"grid: {len(points)} points, upper-bound estimate {est / 60:.1f} min "
              f"(max_epochs={cfg.train.max_epochs})")
        if not args.full_grid:
            print(f"refusing to run more than {GRID_CONFIRM_THRESHOLD} points without --full-grid")
            return 2
    else:
        print(f"grid: {len(points)} points")

    payloads = [(a, m, t, graph) for a, m, t in points]
    workers = max(1, args.workers or os.cpu_count() or 1)
    if workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_grid_point, payloads))
    else:
        rows = [_grid_point(p) for p in payloads]

    metric = cfg.train.selection_metric
    ok = [r for r in rows if r["status"] == "ok"]
    failed = [r for r in rows if r["status"] != "ok"]
    sign = 1.0 if metric in LOWER_IS_BETTER else -1.0
    ok.sort(key=lambda r: sign * r["val"])
    out = _out_dir(cfg)
    keys = list(cfg.grid)
    with open(out / "leaderboard.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rank", *keys, f"val_{metric}", "best_epoch", "status", "error"])
        for i, r in enumerate(ok + failed, 1):
            val = "" if r["val"] is None else repr(float(r["val"]))
            w.writerow([i if r["status"] == "ok" else "", *(r[k] for k in keys), val,
                        "" if r["best_epoch"] is None else r["best_epoch"], r["status"],
                        r["error"]])
    if not ok:
        print(f"grid: all {len(rows)} points failed")
        return 1

    winner = ok[0]
    _, model_cfg, train_cfg = points[rows.index(winner)]
    result, models = run_seeds(model_cfg, train_cfg, graph, return_models=True)
    winner_cfg = replace(cfg, model=model_cfg, train=train_cfg, grid={})
    _write_run(result, models, winner_cfg, out)
    write_json({"assignment": {k: winner[k] for k in keys}, f"val_{metric}": winner["val"],
                "summary": result.summary()}, out / "winner.json")
    print("winner:", {k: winner[k] for k in keys})
    _print_summary(result)
    if failed:
        print(f"grid: {len(failed)} of {len(rows)} points failed; see leaderboard.csv")
        return 1
    return 0


def cmd_ablation(args) -> int:
    cfg = _resolve(args)
    graph = cfg.load_graph()
    results = run_ablation(cfg.model, cfg.train, graph)
    out = _out_dir(cfg)
    write_ablation(results, out)
    print((out / "ablation.md").read_text(), end="")
    return 0


def cmd_bench(args) -> int:
    cfg = _resolve(args)
    graph = cfg.load_graph()
    rows = [measure_efficiency(replace(cfg.model, backbone=b), cfg.train, graph,
                               epochs=args.epochs, passes=args.passes) for b in BACKBONES]
    out = _out_dir(cfg)
    write_bench(rows, out)
    print((out / "bench.md").read_text(), end="")
    return 0


def cmd_synth(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if cfg.synthetic is None:
            raise ConfigError("synth: config has no 'synthetic' section")
        spec, seed = cfg.synthetic, cfg.synthetic_seed
    else:
        spec = SyntheticSpec(num_nodes=args.nodes, num_labels=args.labels,
                             num_features=args.features, prevalence=args.prevalence,
                             p_in=args.p_in, p_out=args.p_out, noise=args.noise)
        seed = args.seed
    graph = generate_synthetic(spec, seed)
    out = save_dataset(graph, args.out)
    save_split(make_split(graph, seed), out / "split.json")
    s = graph.stats()
    print(f"N={s['num_nodes']} |E|={s['num_edges']} d={s['num_features']} C={s['num_labels']}")
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve(args)
    graph = cfg.load_graph()
    seed = args.seed if args.seed is not None else cfg.train.seeds[0]
    model = build_model(replace(cfg.model, seed=seed), graph.num_features, graph.num_labels)
    model.load_state_dict(checkpoint.load_arrays(args.checkpoint))
    report = evaluate(model, graph, normalize_adjacency(graph), make_split(graph, seed).test_ids)
    print(json.dumps({k: round(v, 4) for k, v in report.percent().items()}, indent=2))
    out = _out_dir(cfg)
    write_json({"seed": seed, "checkpoint": str(args.checkpoint), "test": report.to_json()},
               out / "eval.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlnc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment JSON file")
        sp.add_argument("--out", help="output directory (overrides config)")
        sp.add_argument("--seeds", help="comma-separated seeds (overrides config)")
        sp.add_argument("--deterministic", action="store_true")
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--full-grid", action="store_true")

    common(sub.add_parser("train", help="train over seeds and write results"))
    common(sub.add_parser("grid", help="grid search on validation, winner over seeds"))
    common(sub.add_parser("ablation", help="five-variant component ablation"))
    b = sub.add_parser("bench", help="timing and memory per backbone")
    common(b)
    b.add_argument("--epochs", type=int, default=20)
    b.add_argument("--passes", type=int, default=20)
    e = sub.add_parser("eval", help="test metrics of a saved checkpoint")
    common(e)
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--seed", type=int, default=None)

    s = sub.add_parser("synth", help="write a planted synthetic dataset directory")
    s.add_argument("--config", help="take the spec from a config's 'synthetic' section")
    s.add_argument("--out", required=True)
    s.add_argument("--nodes", type=int, default=600)
    s.add_argument("--labels", type=int, default=6)
    s.add_argument("--features", type=int, default=32)
    s.add_argument("--prevalence", type=float, default=0.3)
    s.add_argument("--p-in", type=float, default=0.05)
    s.add_argument("--p-out", type=float, default=0.005)
    s.add_argument("--noise", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=0)
    return p


COMMANDS = {
    "train": cmd_train, "grid": cmd_grid, "ablation": cmd_ablation,
    "bench": cmd_bench, "synth": cmd_synth, "eval": cmd_eval,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, ValueError, OSError, TrainingDiverged) as exc:
        print(f"mlnc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
