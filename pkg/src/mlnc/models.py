"""GCN, SSGConv and GCNII backbones with normalization, dropout and residual toggles.

Every backbone starts from ``H0 = X @ W_in`` and returns pre-sigmoid logits.
Strengthened layers compose as ``Dropout(ReLU(Norm(f + R)))``; the layer that
emits logits skips norm, activation and dropout.

* gcn: K propagation layers, the last one maps hidden -> C directly.
* ssgconv: K hops ``(1 - a) A^k H0 + a H0`` averaged, then a linear head.
* gcnii: K square layers with initial residual and identity mapping, then a
  linear head.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .graph import Graph, NormalizedAdjacency
from .tensor import Param, RunningStats, Tape, Tensor

BACKBONES = ("gcn", "ssgconv", "gcnii")
NORMS = ("none", "batch", "layer")


@dataclass(frozen=True)
class ModelConfig:
    backbone: str = "gcn"
    depth: int = 2
    hidden: int = 64
    dropout_rate: float = 0.5
    norm: str = "batch"
    residual: bool = True
    ssg_alpha: float = 0.05
    gcnii_alpha: float = 0.1
    gcnii_lambda: float = 0.5
    seed: int = 0

    def validate(self) -> None:
        if self.backbone not in BACKBONES:
            raise ValueError(f"backbone must be one of {BACKBONES}, got {self.backbone!r}")
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if not 1 <= self.depth <= 10:
            raise ValueError(f"depth must be in [1, 10], got {self.depth}")
        if self.hidden < 1:
            raise ValueError("hidden must be positive")
        if self.norm == "layer" and self.hidden < 2:
            raise ValueError("layer norm needs hidden >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        for name in ("ssg_alpha", "gcnii_alpha"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.gcnii_lambda < 0:
            raise ValueError("gcnii_lambda must be non-negative")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown model fields {sorted(unknown)}")
        return cls(**obj)


def gcnii_beta(lam: float, layer: int) -> float:
    """Identity-mapping weight for 1-based layer index: ln(lam / layer + 1)."""
    return math.log(lam / layer + 1.0)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


@dataclass
class NormLayer:
    kind: str
    scale: Param
    shift: Param
    stats: RunningStats | None

    def __call__(self, tape: Tape, x: Tensor, train: bool) -> Tensor:
        if self.kind == "batch":
            return tape.batch_norm(x, self.scale, self.shift, self.stats, train)
        return tape.layer_norm(x, self.scale, self.shift)


class Model:
    def __init__(self, config: ModelConfig, num_features: int, num_labels: int):
        config.validate()
        if num_features < 1 or num_labels < 1:
            raise ValueError("num_features and num_labels must be positive")
        self.config = config
        self.num_features = num_features
        self.num_labels = num_labels
        self.params: dict[str, Param] = {}
        self.norms: dict[str, NormLayer] = {}
        rng = np.random.default_rng(config.seed)
        h, c, k = config.hidden, num_labels, config.depth

        self._weight("input_proj.weight", rng, num_features, h)
        if config.backbone == "gcn":
            for i in range(k):
                out = c if i == k - 1 else h
                self._weight(f"layers.{i}.weight", rng, h, out)
                # a bias in front of batch norm is cancelled by the mean subtraction
                if i == k - 1 or config.norm != "batch":
                    self._zeros(f"layers.{i}.bias", out)
                if config.residual and out != h:
                    self._weight(f"layers.{i}.res_proj", rng, h, out)
                if i < k - 1:
                    self._norm(f"layers.{i}.norm", h)
        elif config.backbone == "ssgconv":
            for i in range(k):
                self._norm(f"hops.{i}.norm", h)
            self._weight("head.weight", rng, h, c)
            self._zeros("head.bias", c)
        else:
            for i in range(k):
                self._weight(f"layers.{i}.weight", rng, h, h)
                self._norm(f"layers.{i}.norm", h)
            self._weight("head.weight", rng, h, c)
            self._zeros("head.bias", c)

    def _weight(self, name, rng, fan_in, fan_out):
        self.params[name] = Param(name, glorot(rng, fan_in, fan_out))

    def _zeros(self, name, width):
        self.params[name] = Param(name, np.zeros((1, width)))

    def _norm(self, prefix, width):
        if self.config.norm == "none":
            return
        scale = Param(f"{prefix}.scale", np.ones((1, width)))
        shift = Param(f"{prefix}.shift", np.zeros((1, width)))
        self.params[scale.name] = scale
        self.params[shift.name] = shift
        stats = RunningStats.zeros(width) if self.config.norm == "batch" else None
        self.norms[prefix] = NormLayer(self.config.norm, scale, shift, stats)

    def parameters(self) -> list[Param]:
        return list(self.params.values())

    # ---- state -----------------------------------------------------

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.value.copy() for name, p in self.params.items()}
        for prefix, norm in self.norms.items():
            if norm.stats is not None:
                state[f"{prefix}.running_mean"] = norm.stats.mean.reshape(1, -1).copy()
                state[f"{prefix}.running_var"] = norm.stats.var.reshape(1, -1).copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        expected = set(self.state_dict())
        if set(state) != expected:
            raise ValueError(
                f"state mismatch: missing {sorted(expected - set(state))}, "
                f"unexpected {sorted(set(state) - expected)}"
            )
        for name, p in self.params.items():
            if state[name].shape != p.value.shape:
                raise ValueError(f"{name}: shape {state[name].shape} != {p.value.shape}")
            p.value[...] = state[name]
        for prefix, norm in self.norms.items():
            if norm.stats is not None:
                norm.stats.mean = state[f"{prefix}.running_mean"].reshape(-1).copy()
                norm.stats.var = state[f"{prefix}.running_var"].reshape(-1).copy()

    # ---- forward ---------------------------------------------------

    def _wrap(self, tape, pre, norm_key, train, rng, last=False):
        """Norm -> ReLU -> Dropout on a hidden layer's pre-activation."""
        if last:
            return pre
        if norm_key in self.norms:
            pre = self.norms[norm_key](tape, pre, train)
        out = tape.relu(pre)
        return tape.dropout(out, self.config.dropout_rate, train, rng)

    def gcn_layer(self, tape, adj, h, i, train, rng):
        cfg = self.config
        last = i == cfg.depth - 1
        w = self.params[f"layers.{i}.weight"]
        t = tape.matmul(tape.spmm(adj, h), w)
        if f"layers.{i}.bias" in self.params:
            t = tape.add_bias(t, self.params[f"layers.{i}.bias"])
        if cfg.residual:
            proj = self.params.get(f"layers.{i}.res_proj")
            t = tape.add(t, h if proj is None else tape.matmul(h, proj))
        return self._wrap(tape, t, f"layers.{i}.norm", train, rng, last=last)

    def ssg_propagate(self, tape, adj, h0, train, rng):
        cfg = self.config
        a = cfg.ssg_alpha
        prev = h0
        hops = []
        for i in range(cfg.depth):
            cur = tape.spmm(adj, prev)
            term = tape.add(tape.scale(cur, 1.0 - a), tape.scale(h0, a))
            if cfg.residual:
                term = tape.add(term, prev)
            key = f"hops.{i}.norm"
            if key in self.norms:
                term = self.norms[key](tape, term, train)
            hops.append(tape.dropout(term, cfg.dropout_rate, train, rng))
            prev = cur
        return tape.mean(hops)

    def gcnii_layer(self, tape, adj, h, h0, i, train, rng):
        cfg = self.config
        a = cfg.gcnii_alpha
        beta = gcnii_beta(cfg.gcnii_lambda, i + 1)
        z = tape.add(tape.scale(tape.spmm(adj, h), 1.0 - a), tape.scale(h0, a))
        t = tape.add(tape.scale(z, 1.0 - beta),
                     tape.scale(tape.matmul(z, self.params[f"layers.{i}.weight"]), beta))
        if cfg.residual:
            t = tape.add(t, h)
        return self._wrap(tape, t, f"layers.{i}.norm", train, rng)

    def forward(self, graph: Graph, adj: NormalizedAdjacency, mode: str = "eval",
                tape: Tape | None = None, rng: np.random.Generator | None = None) -> Tensor:
        """Return pre-sigmoid logits (N x C)."""
        if mode not in ("train", "eval"):
            raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
        if graph.num_features != self.num_features:
            raise ValueError(
                f"graph has {graph.num_features} features, model expects {self.num_features}"
            )
        train = mode == "train"
        if tape is None:
            tape = Tape(record=False)
        if train and self.config.dropout_rate > 0 and rng is None:
            raise ValueError("train mode with dropout needs an rng")
        x = Tensor(graph.features)
        h0 = tape.matmul(x, self.params["input_proj.weight"])
        backbone = self.config.backbone
        if backbone == "gcn":
            h = h0
            for i in range(self.config.depth):
                h = self.gcn_layer(tape, adj, h, i, train, rng)
            return h
        if backbone == "ssgconv":
            h = self.ssg_propagate(tape, adj, h0, train, rng)
        else:
            h = h0
            for i in range(self.config.depth):
                h = self.gcnii_layer(tape, adj, h, h0, i, train, rng)
        return tape.linear(h, self.params["head.weight"], self.params["head.bias"])


def build_model(config: ModelConfig, num_features: int, num_labels: int) -> Model:
    return Model(config, num_features, num_labels)


def forward(model: Model, graph: Graph, adj: NormalizedAdjacency, mode: str = "eval",
            tape: Tape | None = None, rng=None) -> Tensor:
    return model.forward(graph, adj, mode, tape=tape, rng=rng)
