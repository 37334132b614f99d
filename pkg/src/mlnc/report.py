"""CSV / JSON / markdown emitters. Table values use x100 metric scaling."""
from __future__ import annotations

import csv
import json
from pathlib import Path

from .metrics import ABLATION_METRICS, LOWER_IS_BETTER, METRIC_NAMES
from .trainer import RunResult

HEADERS = {
    "ranking_loss": "Ranking",
    "hamming_loss": "Hamming",
    "macro_auc": "Ma-AUC",
    "micro_auc": "Mi-AUC",
    "macro_ap": "Ma-AP",
    "micro_ap": "Mi-AP",
    "lrap": "LRAP",
}


def _arrow(name):
    return "↓" if name in LOWER_IS_BETTER else "↑"


def _cell(stat: dict) -> str:
    if stat["std"] is None:
        return f"{stat['mean']:.2f}"
    return f"{stat['mean']:.2f} ± {stat['std']:.2f}"


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_results_csv(result: RunResult, path) -> None:
    summary = result.summary()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "seed", *METRIC_NAMES])
        for run in result.runs:
            pct = run.test.percent()
            w.writerow(["seed", run.seed, *(_num(pct[m]) for m in METRIC_NAMES)])
        w.writerow(["mean", "", *(_num(summary[m]["mean"]) for m in METRIC_NAMES)])
        w.writerow(["std", "", *(_num(summary[m]["std"]) for m in METRIC_NAMES)])


def results_markdown(result: RunResult, title: str = "") -> str:
    summary = result.summary()
    cols = [f"{HEADERS[m]} {_arrow(m)}" for m in METRIC_NAMES]
    lines = [f"### {title}", ""] if title else []
    lines.append("| Model | " + " | ".join(cols) + " |")
    lines.append("|" + "---|" * (len(cols) + 1))
    name = result.model_config.backbone.upper() if result.model_config.backbone != "ssgconv" \
        else "SSGConv"
    lines.append(f"| {name} | " + " | ".join(_cell(summary[m]) for m in METRIC_NAMES) + " |")
    return "\n".join(lines) + "\n"


def write_ablation(results: dict[str, RunResult], out_dir) -> None:
    out = Path(out_dir)
    rows = []
    for variant, res in results.items():
        s = res.summary()
        rows.append((variant, {m: s[m] for m in ABLATION_METRICS}))
    with open(out / "ablation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variant", *(f"{m}_{k}" for m in ABLATION_METRICS for k in ("mean", "std"))])
        for variant, stats in rows:
            w.writerow([variant, *(_num(stats[m][k]) for m in ABLATION_METRICS
                                   for k in ("mean", "std"))])
    lines = ["| Variant | " + " | ".join(f"{HEADERS[m]} ↑" for m in ABLATION_METRICS) + " |",
             "|---|---|---|---|"]
    for variant, stats in rows:
        lines.append(f"| {variant} | " + " | ".join(_cell(stats[m]) for m in ABLATION_METRICS)
                     + " |")
    (out / "ablation.md").write_text("\n".join(lines) + "\n")
    write_json({v: r.to_json() for v, r in results.items()}, out / "ablation.json")


def write_bench(rows: list[dict], out_dir) -> None:
    out = Path(out_dir)
    keys = ["backbone", "depth", "train_ms_per_epoch", "inference_ms", "peak_rss_mb"]
    with open(out / "bench.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in rows:
            w.writerow([r[k] if isinstance(r[k], (str, int)) else _num(r[k]) for k in keys])
    lines = ["| Model | Train / Epoch (ms) | Infer. (ms) | Peak RSS (MB) |", "|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r['backbone']} | {r['train_ms_per_epoch']:.1f} | "
                     f"{r['inference_ms']:.1f} | {r['peak_rss_mb']:.1f} |")
    (out / "bench.md").write_text("\n".join(lines) + "\n")
