"""Grid-select an enhanced GCN on a user-supplied Humloc-format directory.

The directory must hold edges.tsv, features.csv and labels.csv (see README).
Checks the loaded shape, runs the grid from configs/humloc_gcn_grid.json and
compares the winner's 5-seed test means to the published reference values.

    python3 scripts/humloc_repro.py /path/to/humloc --workers 1
"""
import argparse
import json
import sys
import tempfile
from pathlib import Path

from mlnc import cli
from mlnc.data import load_dataset

REFERENCE = {"macro_auc": (79.35, 3.0), "lrap": (67.10, 2.0)}  # (value, allowed gap), x100
EXPECTED_SHAPE = (3106, 32, 14)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data_dir")
    ap.add_argument("--out", default="runs/humloc_repro")
    ap.add_argument("--workers", type=int, default=None)
    args = ap.parse_args()

    graph = load_dataset(args.data_dir)
    shape = (graph.num_nodes, graph.num_features, graph.num_labels)
    print(f"loaded N={shape[0]} d={shape[1]} C={shape[2]} |E|={graph.num_edges}")
    if shape != EXPECTED_SHAPE:
        print(f"shape mismatch: expected N/d/C {EXPECTED_SHAPE}")
        return 1

    cfg = json.loads((Path(__file__).resolve().parents[1] / "configs" /
                      "humloc_gcn_grid.json").read_text())
    cfg["dataset"], cfg["out"] = str(Path(args.data_dir).resolve()), args.out
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
        json.dump(cfg, fh)
    argv = ["grid", "--config", fh.name]
    if args.workers:
        argv += ["--workers", str(args.workers)]
    code = cli.main(argv)
    if code != 0:
        return code

    summary = json.loads((Path(args.out) / "winner.json").read_text())["summary"]
    ok = True
    for metric, (ref, gap) in REFERENCE.items():
        got = summary[metric]["mean"]
        hit = abs(got - ref) <= gap
        ok &= hit
        print(f"{metric:>9}: {got:.2f} (reference {ref:.2f} +/- {gap}) {'ok' if hit else 'MISS'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
