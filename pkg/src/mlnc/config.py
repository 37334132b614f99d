"""JSON experiment configs and the hyperparameter grid."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data import SyntheticSpec, generate_synthetic, load_dataset
from .models import ModelConfig
from .trainer import TrainConfig

# search space used by the strengthened backbones
FULL_GRID = {
    "learning_rate": [0.001, 0.005, 0.01],
    "hidden": [64, 128, 256],
    "dropout_rate": [0.0, 0.2, 0.3, 0.5],
    "depth": list(range(1, 11)),
    "norm": ["batch", "layer"],
    "residual": [True, False],
}

MODEL_FIELDS = {f.name for f in fields(ModelConfig)}
TRAIN_FIELDS = {f.name for f in fields(TrainConfig)}
GRID_FIELDS = (MODEL_FIELDS | TRAIN_FIELDS) - {"seed", "seeds", "deterministic"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    train: TrainConfig
    dataset: str | None = None
    synthetic: SyntheticSpec | None = None
    synthetic_seed: int = 0
    grid: dict = field(default_factory=dict)
    out: str = "runs/default"

    def to_json(self) -> dict:
        obj = {
            "dataset": self.dataset,
            "synthetic": None if self.synthetic is None else
            {**self.synthetic.to_json(), "seed": self.synthetic_seed},
            "model": self.model.to_json(),
            "train": self.train.to_json(),
            "out": self.out,
        }
        if self.grid:
            obj["grid"] = {k: list(v) for k, v in self.grid.items()}
        return obj

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    def load_graph(self):
        if self.dataset is not None:
            return load_dataset(self.dataset)
        return generate_synthetic(self.synthetic, self.synthetic_seed)

    def grid_points(self) -> list[tuple[dict, ModelConfig, TrainConfig]]:
        keys = list(self.grid)
        points = []
        for combo in itertools.product(*(self.grid[k] for k in keys)):
            assignment = dict(zip(keys, combo))
            m = {k: v for k, v in assignment.items() if k in MODEL_FIELDS}
            t = {k: v for k, v in assignment.items() if k in TRAIN_FIELDS}
            points.append((assignment, replace(self.model, **m), replace(self.train, **t)))
        return points


def _section(obj: dict, key: str, cls, path: str):
    raw = obj.get(key, {})
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected an object")
    try:
        cfg = cls.from_json(raw)
        cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


def parse_config(obj: dict) -> ExperimentConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config: expected a JSON object")
    unknown = set(obj) - {"dataset", "synthetic", "model", "train", "grid", "out"}
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    model = _section(obj, "model", ModelConfig, "model")
    train = _section(obj, "train", TrainConfig, "train")

    dataset, synth = obj.get("dataset"), obj.get("synthetic")
    if (dataset is None) == (synth is None):
        raise ConfigError("config: exactly one of 'dataset' and 'synthetic' must be set")
    spec, synth_seed = None, 0
    if synth is not None:
        synth = dict(synth)
        synth_seed = int(synth.pop("seed", 0))
        try:
            spec = SyntheticSpec(**synth)
            spec.validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"synthetic: {exc}") from None

    grid = obj.get("grid") or {}
    if not isinstance(grid, dict):
        raise ConfigError("grid: expected an object of value lists")
    for key, values in grid.items():
        if key not in GRID_FIELDS:
            raise ConfigError(f"grid.{key}: not a tunable field")
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid.{key}: expected a non-empty list")
        for i, v in enumerate(values):
            try:
                if key in MODEL_FIELDS:
                    replace(model, **{key: v}).validate()
                else:
                    replace(train, **{key: v}).validate()
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"grid.{key}[{i}]: {exc}") from None
    return ExperimentConfig(
        model=model, train=train, dataset=dataset, synthetic=spec, synthetic_seed=synth_seed,
        grid={k: list(v) for k, v in grid.items()}, out=str(obj.get("out", "runs/default")),
    )


def load_config(path) -> ExperimentConfig:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return parse_config(obj)
