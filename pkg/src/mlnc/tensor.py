"""Minimal reverse-mode differentiation over 2-d float64 arrays.

A ``Tape`` records one closure per primitive application; ``Tape.backward``
replays them in reverse order. With ``record=False`` the same primitives run
as plain forward functions (evaluation mode).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import NormalizedAdjacency, spmm as _spmm

BN_EPS = 1e-5
LN_EPS = 1e-5
BN_MOMENTUM = 0.1


class NonFiniteError(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("value", "grad")

    def __init__(self, value):
        self.value = np.asarray(value, dtype=np.float64)
        if self.value.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {self.value.shape}")
        self.grad = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"{type(self).__name__}{self.shape}"


class Param(Tensor):
    """Trainable leaf with a stable identifier used by checkpoints and the optimizer."""

    __slots__ = ("name",)

    def __init__(self, name: str, value):
        super().__init__(np.array(value, dtype=np.float64))
        self.name = name

    def __repr__(self):
        return f"Param({self.name!r}, {self.shape})"


@dataclass
class RunningStats:
    mean: np.ndarray
    var: np.ndarray
    momentum: float = BN_MOMENTUM

    @classmethod
    def zeros(cls, width: int) -> "RunningStats":
        return cls(np.zeros(width), np.ones(width))


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def _checked(value: np.ndarray, op: str) -> Tensor:
    if not np.isfinite(value).all():
        raise NonFiniteError(f"non-finite value produced by {op}")
    return Tensor(value)


def softplus(z: np.ndarray) -> np.ndarray:
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(z, 0.0)


def sigmoid_array(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class Tape:
    record: bool = True
    _backward: list = field(default_factory=list, repr=False)
    _params: dict = field(default_factory=dict, repr=False)
    relu_masks: list = field(default_factory=list, repr=False)

    def _push(self, fn, *inputs: Tensor) -> None:
        if not self.record:
            return
        for t in inputs:
            if isinstance(t, Param):
                self._params[id(t)] = t
        self._backward.append(fn)

    def __len__(self):
        return len(self._backward)

    def backward(self, loss: Tensor, grad: np.ndarray | None = None) -> None:
        """Propagate from ``loss``; ``grad`` seeds a non-scalar output instead of 1."""
        if grad is None and loss.shape != (1, 1):
            raise ValueError("backward expects a scalar (1x1) loss unless grad is given")
        if not self.record:
            raise RuntimeError("cannot run backward on a non-recording tape")
        for p in self._params.values():
            p.grad = np.zeros_like(p.value)
        loss.grad = np.ones((1, 1)) if grad is None else np.array(grad, dtype=np.float64)
        for fn in reversed(self._backward):
            fn()

    # ---- primitives -------------------------------------------------

    def matmul(self, x: Tensor, w: Tensor) -> Tensor:
        if x.shape[1] != w.shape[0]:
            raise ValueError(f"matmul shape mismatch {x.shape} @ {w.shape}")
        out = _checked(x.value @ w.value, "matmul")

        def back():
            if out.grad is None:
                return
            _acc(x, out.grad @ w.value.T)
            _acc(w, x.value.T @ out.grad)

        self._push(back, x, w)
        return out

    def add_bias(self, x: Tensor, b: Tensor) -> Tensor:
        if b.shape != (1, x.shape[1]):
            raise ValueError(f"bias shape {b.shape} does not match width {x.shape[1]}")
        out = _checked(x.value + b.value, "add_bias")

        def back():
            if out.grad is None:
                return
            _acc(x, out.grad)
            _acc(b, out.grad.sum(axis=0, keepdims=True))

        self._push(back, x, b)
        return out

    def linear(self, x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
        out = self.matmul(x, w)
        return out if b is None else self.add_bias(out, b)

    def add(self, *terms: Tensor) -> Tensor:
        shape = terms[0].shape
        if any(t.shape != shape for t in terms):
            raise ValueError(f"add shape mismatch {[t.shape for t in terms]}")
        out = _checked(sum(t.value for t in terms[1:]) + terms[0].value, "add")

        def back():
            if out.grad is None:
                return
            for t in terms:
                _acc(t, out.grad)

        self._push(back, *terms)
        return out

    def scale(self, x: Tensor, c: float) -> Tensor:
        out = Tensor(x.value * c)

        def back():
            if out.grad is not None:
                _acc(x, out.grad * c)

        self._push(back, x)
        return out

    def spmm(self, adj: NormalizedAdjacency, x: Tensor) -> Tensor:
        out = _checked(_spmm(adj, x.value), "spmm")

        def back():
            # normalized adjacency is symmetric, so it is its own transpose
            if out.grad is not None:
                _acc(x, _spmm(adj, out.grad))

        self._push(back, x)
        return out

    def relu(self, x: Tensor) -> Tensor:
        mask = x.value > 0
        out = Tensor(np.where(mask, x.value, 0.0))
        if self.record:
            self.relu_masks.append(mask)

        def back():
            if out.grad is not None:
                _acc(x, out.grad * mask)

        self._push(back, x)
        return out

    def sigmoid(self, x: Tensor) -> Tensor:
        s = sigmoid_array(x.value)
        out = Tensor(s)

        def back():
            if out.grad is not None:
                _acc(x, out.grad * s * (1.0 - s))

        self._push(back, x)
        return out

    def batch_norm(self, x: Tensor, scale: Tensor, shift: Tensor, stats: RunningStats,
                   train: bool) -> Tensor:
        """Column-wise normalization over all N rows (the whole graph is the batch).

        Training uses biased batch variance and updates the running estimates
        (unbiased variance, as in common frameworks); evaluation uses the
        running estimates only.
        """
        n = x.shape[0]
        if train:
            if n < 2:
                raise ValueError("batch_norm needs at least 2 rows in train mode")
            mu = x.value.mean(axis=0)
            var = x.value.var(axis=0)
            m = stats.momentum
            stats.mean = (1 - m) * stats.mean + m * mu
            stats.var = (1 - m) * stats.var + m * var * n / (n - 1)
        else:
            mu, var = stats.mean, stats.var
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (x.value - mu) * inv_std
        out = _checked(xhat * scale.value + shift.value, "batch_norm")

        def back():
            if out.grad is None:
                return
            g = out.grad
            _acc(scale, (g * xhat).sum(axis=0, keepdims=True))
            _acc(shift, g.sum(axis=0, keepdims=True))
            gx = g * scale.value
            if train:
                dx = inv_std * (gx - gx.mean(axis=0) - xhat * (gx * xhat).mean(axis=0))
            else:
                dx = gx * inv_std
            _acc(x, dx)

        self._push(back, x, scale, shift)
        return out

    def layer_norm(self, x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
        if x.shape[1] < 2:
            raise ValueError("layer_norm needs at least 2 features per row")
        mu = x.value.mean(axis=1, keepdims=True)
        var = x.value.var(axis=1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + LN_EPS)
        xhat = (x.value - mu) * inv_std
        out = _checked(xhat * scale.value + shift.value, "layer_norm")

        def back():
            if out.grad is None:
                return
            g = out.grad
            _acc(scale, (g * xhat).sum(axis=0, keepdims=True))
            _acc(shift, g.sum(axis=0, keepdims=True))
            gx = g * scale.value
            dx = inv_std * (
                gx - gx.mean(axis=1, keepdims=True)
                - xhat * (gx * xhat).mean(axis=1, keepdims=True)
            )
            _acc(x, dx)

        self._push(back, x, scale, shift)
        return out

    def dropout(self, x: Tensor, rate: float, train: bool, rng: np.random.Generator | None) -> Tensor:
        """Inverted dropout; identity in eval mode or at rate 0."""
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        if not train or rate == 0.0:
            return x
        keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
        out = Tensor(x.value * keep)

        def back():
            if out.grad is not None:
                _acc(x, out.grad * keep)

        self._push(back, x)
        return out

    def mean(self, terms: list[Tensor]) -> Tensor:
        return self.scale(self.add(*terms), 1.0 / len(terms)) if len(terms) > 1 else terms[0]

    def bce_with_logits(self, logits: Tensor, target: np.ndarray, rows) -> Tensor:
        """Summed binary cross-entropy over the given rows, computed from logits.

        Uses log(1 + exp(-|z|)) + max(z, 0) - z*y so that no probability is
        ever passed through a log.
        """
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            raise ValueError("bce loss over an empty node set")
        if target.shape != logits.shape:
            raise ValueError(f"target shape {target.shape} != logits shape {logits.shape}")
        z = logits.value[rows]
        y = target[rows].astype(np.float64)
        out = _checked(np.array([[np.sum(softplus(z) - z * y)]]), "bce_with_logits")

        def back():
            if out.grad is None:
                return
            g = np.zeros_like(logits.value)
            g[rows] = (sigmoid_array(z) - y) * out.grad[0, 0]
            _acc(logits, g)

        self._push(back, logits)
        return out


def naive_bce(prob: np.ndarray, target: np.ndarray) -> float:
    return float(-np.sum(target * np.log(prob) + (1 - target) * np.log(1 - prob)))
