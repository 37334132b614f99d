"""Dataset directory I/O, seeded 6:2:2 splits and the planted multi-label generator.

Directory layout::

    edges.tsv     src<TAB>dst per line, 0-based ids (treated as undirected)
    features.csv  N lines of d comma-separated reals
    labels.csv    N lines of C comma-separated 0/1
    meta.json     optional {"num_nodes", "num_features", "num_labels"}
    split.json    optional, written by ``save_split``
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .graph import Graph


class DatasetError(ValueError):
    pass


def _read_matrix(path: Path, kind: str, cast) -> list[list]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([cast(tok) for tok in line.split(",")])
            except ValueError:
                raise DatasetError(f"{path.name}:{lineno}: malformed {kind} line {line!r}") from None
            if len(rows[-1]) != len(rows[0]):
                raise DatasetError(
                    f"{path.name}:{lineno}: expected {len(rows[0])} columns, got {len(rows[-1])}"
                )
    return rows


def _binary(tok: str) -> int:
    v = int(tok)
    if v not in (0, 1):
        raise ValueError(tok)
    return v


def load_dataset(dir_path) -> Graph:
    """Read a dataset directory. Asymmetric edge lists are symmetrized silently."""
    d = Path(dir_path)
    if not d.is_absolute() and not d.exists() and os.environ.get("MLNC_DATA_DIR"):
        d = Path(os.environ["MLNC_DATA_DIR"]) / d
    features = _read_matrix(d / "features.csv", "feature", float)
    labels = _read_matrix(d / "labels.csv", "label", _binary)
    n = len(features)
    if len(labels) != n:
        raise DatasetError(f"features.csv has {n} rows but labels.csv has {len(labels)}")
    if n == 0:
        raise DatasetError("dataset has no nodes")

    edges = []
    with open(d / "edges.tsv") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            try:
                if len(parts) != 2:
                    raise ValueError
                src, dst = int(parts[0]), int(parts[1])
            except ValueError:
                raise DatasetError(f"edges.tsv:{lineno}: malformed edge line {line!r}") from None
            if not (0 <= src < n and 0 <= dst < n):
                raise DatasetError(f"edges.tsv:{lineno}: node index out of range [0, {n})")
            edges.append((src, dst))

    graph = Graph.from_edges(n, edges, features, labels)
    meta_path = d / "meta.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        actual = graph.stats()
        for key in ("num_nodes", "num_features", "num_labels"):
            if key in meta and meta[key] != actual[key]:
                raise DatasetError(f"meta.json {key}={meta[key]} but files give {actual[key]}")
    return graph


def save_dataset(graph: Graph, dir_path) -> Path:
    d = Path(dir_path)
    d.mkdir(parents=True, exist_ok=True)
    rows = np.repeat(np.arange(graph.num_nodes), graph.degrees())
    keep = rows < graph.indices
    with open(d / "edges.tsv", "w") as fh:
        for s, t in zip(rows[keep], graph.indices[keep]):
            fh.write(f"{s}\t{t}\n")
    with open(d / "features.csv", "w") as fh:
        for row in graph.features:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    with open(d / "labels.csv", "w") as fh:
        for row in graph.labels:
            fh.write(",".join(str(int(x)) for x in row) + "\n")
    meta = {k: v for k, v in graph.stats().items() if k != "num_edges"}
    (d / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return d


@dataclass(frozen=True)
class Split:
    train_ids: np.ndarray
    val_ids: np.ndarray
    test_ids: np.ndarray
    seed: int

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "train_ids": self.train_ids.tolist(),
            "val_ids": self.val_ids.tolist(),
            "test_ids": self.test_ids.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Split":
        return cls(
            np.asarray(obj["train_ids"], dtype=np.int64),
            np.asarray(obj["val_ids"], dtype=np.int64),
            np.asarray(obj["test_ids"], dtype=np.int64),
            int(obj["seed"]),
        )


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def make_split(graph_or_n, seed: int) -> Split:
    """Uniform random 6:2:2 partition of node ids; not stratified by label."""
    n = graph_or_n if isinstance(graph_or_n, (int, np.integer)) else graph_or_n.num_nodes
    if n < 5:
        raise ValueError(f"need at least 5 nodes to split, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = _round_half_up(0.6 * n)
    n_val = _round_half_up(0.2 * n)
    return Split(
        np.sort(perm[:n_train]),
        np.sort(perm[n_train:n_train + n_val]),
        np.sort(perm[n_train + n_val:]),
        int(seed),
    )


def save_split(split: Split, path) -> None:
    Path(path).write_text(json.dumps(split.to_json()) + "\n")


def load_split(path) -> Split:
    return Split.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SyntheticSpec:
    """Planted multi-label graph: nodes sharing a label connect with prob ``p_in``."""

    num_nodes: int = 600
    num_labels: int = 6
    num_features: int = 32
    prevalence: float = 0.3
    p_in: float = 0.05
    p_out: float = 0.005
    noise: float = 1.0

    def validate(self) -> None:
        for name in ("prevalence", "p_in", "p_out"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if self.prevalence == 0.0:
            raise ValueError("prevalence must be positive so every node can receive a label")
        if self.p_out > self.p_in:
            raise ValueError("p_out must not exceed p_in")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        if self.num_nodes < 1 or self.num_labels < 1:
            raise ValueError("num_nodes and num_labels must be positive")
        if self.num_features < self.num_labels:
            raise ValueError("num_features must be >= num_labels")

    def to_json(self) -> dict:
        return asdict(self)


# a 50-node graph small enough to memorize; used by smoke tests and the overfit check
FIXTURE_SPEC = SyntheticSpec(
    num_nodes=50, num_labels=4, num_features=8, prevalence=0.3, p_in=0.2, p_out=0.02, noise=0.5
)
FIXTURE_SEED = 0
DESK_SPEC = SyntheticSpec(
    num_nodes=600, num_labels=6, num_features=32, prevalence=0.3, p_in=0.05, p_out=0.005, noise=1.0
)


def sample_labels(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    labels = rng.random((spec.num_nodes, spec.num_labels)) < spec.prevalence
    empty = ~labels.any(axis=1)
    while empty.any():
        labels[empty] = rng.random((int(empty.sum()), spec.num_labels)) < spec.prevalence
        empty = ~labels.any(axis=1)
    return labels.astype(np.int8)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Graph:
    spec.validate()
    rng = np.random.default_rng(seed)
    n = spec.num_nodes
    labels = sample_labels(spec, rng)
    shares = (labels.astype(np.int64) @ labels.T.astype(np.int64)) > 0
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(shares[iu, ju], spec.p_in, spec.p_out)
    keep = rng.random(iu.size) < prob
    features = rng.normal(0.0, spec.noise, size=(n, spec.num_features)) if spec.noise > 0 \
        else np.zeros((n, spec.num_features))
    features[:, : spec.num_labels] += labels
    return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1), features, labels)
