"""Seeded full-graph training, multi-seed aggregation, ablations and timing."""
from __future__ import annotations

import contextlib
import logging
import resource
import statistics
import time
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
from threadpoolctl import threadpool_limits

from . import metrics as M
from .data import Split, make_split
from .graph import Graph, NormalizedAdjacency, normalize_adjacency
from .models import Model, ModelConfig, build_model
from .optim import AdamState, adam_step
from .tensor import NonFiniteError, Tape

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (0, 1, 2, 3, 4)
ABLATION_VARIANTS = ("Basic", "w/o Dropout", "w/o Residual", "w/o Norm", "Full")


class TrainingDiverged(RuntimeError):
    def __init__(self, msg, epoch=None, seed=None):
        super().__init__(msg)
        self.epoch = epoch
        self.seed = seed


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    max_epochs: int = 500
    patience: int = 50
    selection_metric: str = "micro_ap"
    seeds: tuple = DEFAULT_SEEDS
    deterministic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def validate(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be positive")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError("patience must be in [1, max_epochs]")
        if self.selection_metric not in M.METRIC_NAMES:
            raise ValueError(f"selection_metric must be one of {M.METRIC_NAMES}")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")

    def to_json(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown train fields {sorted(unknown)}")
        return cls(**obj)


@dataclass
class SeedRun:
    seed: int
    best_epoch: int
    epochs_run: int
    best_val: float
    test: M.MetricsReport
    train_loss: list = field(default_factory=list)  # mean BCE per epoch, train mode
    val_history: list = field(default_factory=list)
    train_ms_per_epoch: float = 0.0
    inference_ms: float = 0.0

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "epochs_run": self.epochs_run,
            "best_val": self.best_val,
            "final_train_loss": self.train_loss[-1],
            "test": self.test.to_json(),
        }


def aggregate(values: list[float]) -> dict:
    """Mean and sample (n-1) standard deviation; std is None for a single value."""
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) >= 2 else None
    return {"mean": mean, "std": std}


@dataclass
class RunResult:
    model_config: ModelConfig
    train_config: TrainConfig
    runs: list[SeedRun]

    def summary(self) -> dict[str, dict]:
        """Per-metric mean/std over seeds, in table units (x100)."""
        return {
            name: aggregate([r.test.percent()[name] for r in self.runs])
            for name in M.METRIC_NAMES
        }

    def timings(self) -> dict:
        return {
            "train_ms_per_epoch": [r.train_ms_per_epoch for r in self.runs],
            "inference_ms": [r.inference_ms for r in self.runs],
        }

    def to_json(self) -> dict:
        return {
            "model": self.model_config.to_json(),
            "train": self.train_config.to_json(),
            "runs": [r.to_json() for r in self.runs],
            "summary": self.summary(),
        }


def deterministic_context(flag: bool):
    return threadpool_limits(limits=1) if flag else contextlib.nullcontext()


def _selection_value(model, graph, adj, ids, metric) -> float:
    from .tensor import sigmoid_array

    logits = model.forward(graph, adj, "eval").value[ids]
    return getattr(M, metric)(sigmoid_array(logits), graph.labels[ids])


def train_one(model_config: ModelConfig, train_config: TrainConfig, graph: Graph, split: Split,
              seed: int, adj: NormalizedAdjacency | None = None,
              early_stopping: bool = True) -> tuple[Model, SeedRun]:
    """Train one model; the returned model holds the best-validation snapshot."""
    train_config.validate()
    adj = adj if adj is not None else normalize_adjacency(graph)
    model = build_model(replace(model_config, seed=seed), graph.num_features, graph.num_labels)
    opt = AdamState(model.parameters(), lr=train_config.learning_rate)
    rng = np.random.default_rng([seed, 1])
    metric = train_config.selection_metric
    n_entries = split.train_ids.size * graph.num_labels

    best_val, best_epoch, best_state = None, -1, None
    losses, val_history, epoch_ms = [], [], []
    epoch = 0
    for epoch in range(train_config.max_epochs):
        t0 = time.perf_counter()
        tape = Tape()
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                logits = model.forward(graph, adj, "train", tape=tape, rng=rng)
                loss = tape.bce_with_logits(logits, graph.labels, split.train_ids)
                tape.backward(loss)
                adam_step(opt)
                epoch_ms.append(1e3 * (time.perf_counter() - t0))
                val = _selection_value(model, graph, adj, split.val_ids, metric)
        except NonFiniteError as exc:
            raise TrainingDiverged(f"seed {seed}: non-finite values at epoch {epoch}: {exc}",
                                   epoch=epoch, seed=seed) from exc
        losses.append(float(loss.value[0, 0]) / n_entries)

        val_history.append(val)
        if best_val is None or M.better(metric, val, best_val):
            best_val, best_epoch, best_state = val, epoch, model.state_dict()
        elif early_stopping and epoch - best_epoch >= train_config.patience:
            break

    model.load_state_dict(best_state)
    t0 = time.perf_counter()
    test = M.evaluate(model, graph, adj, split.test_ids)
    infer_ms = 1e3 * (time.perf_counter() - t0)
    log.debug("seed %d: best epoch %d of %d, val %s=%.4f", seed, best_epoch, epoch + 1,
              metric, best_val)
    return model, SeedRun(
        seed=seed, best_epoch=best_epoch, epochs_run=epoch + 1, best_val=best_val, test=test,
        train_loss=losses, val_history=val_history,
        train_ms_per_epoch=statistics.fmean(epoch_ms), inference_ms=infer_ms,
    )


def run_seeds(model_config: ModelConfig, train_config: TrainConfig, graph: Graph,
              return_models: bool = False):
    """Train once per seed; each seed draws its own split and initialization."""
    adj = normalize_adjacency(graph)
    runs, models = [], []
    with deterministic_context(train_config.deterministic):
        for seed in train_config.seeds:
            split = make_split(graph, seed)
            try:
                model, run = train_one(model_config, train_config, graph, split, seed, adj=adj)
            except TrainingDiverged as exc:
                exc.seed = seed
                raise
            runs.append(run)
            models.append(model)
    result = RunResult(model_config, train_config, runs)
    return (result, models) if return_models else result


def ablation_configs(base: ModelConfig) -> dict[str, ModelConfig]:
    if base.norm == "none" or not base.residual or base.dropout_rate == 0:
        raise ValueError("ablation base config must enable norm, residual and dropout")
    return {
        "Basic": replace(base, residual=False, norm="none", dropout_rate=0.0),
        "w/o Dropout": replace(base, dropout_rate=0.0),
        "w/o Residual": replace(base, residual=False),
        "w/o Norm": replace(base, norm="none"),
        "Full": base,
    }


def run_ablation(base_config: ModelConfig, train_config: TrainConfig,
                 graph: Graph) -> dict[str, RunResult]:
    """Five-variant component ablation, returned in table row order."""
    return {name: run_seeds(cfg, train_config, graph)
            for name, cfg in ablation_configs(base_config).items()}


def peak_rss_mb() -> float:
    # ru_maxrss is KiB on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def measure_efficiency(model_config: ModelConfig, train_config: TrainConfig, graph: Graph,
                       epochs: int = 20, passes: int = 20) -> dict:
    """Median wall-clock ms per training epoch and per inference pass, plus peak RSS."""
    adj = normalize_adjacency(graph)
    split = make_split(graph, train_config.seeds[0])
    model = build_model(model_config, graph.num_features, graph.num_labels)
    opt = AdamState(model.parameters(), lr=train_config.learning_rate)
    rng = np.random.default_rng([model_config.seed, 1])
    epoch_ms, infer_ms = [], []
    with deterministic_context(train_config.deterministic):
        for _ in range(epochs):
            t0 = time.perf_counter()
            tape = Tape()
            logits = model.forward(graph, adj, "train", tape=tape, rng=rng)
            tape.backward(tape.bce_with_logits(logits, graph.labels, split.train_ids))
            adam_step(opt)
            epoch_ms.append(1e3 * (time.perf_counter() - t0))
        for _ in range(passes):
            t0 = time.perf_counter()
            model.forward(graph, adj, "eval")
            infer_ms.append(1e3 * (time.perf_counter() - t0))
    return {
        "backbone": model_config.backbone,
        "depth": model_config.depth,
        "train_ms_per_epoch": statistics.median(epoch_ms),
        "inference_ms": statistics.median(infer_ms),
        "peak_rss_mb": peak_rss_mb(),
    }
