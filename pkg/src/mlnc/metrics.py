"""Seven multi-label metrics with a single tie policy.

Tied score pairs earn half credit and ranks are mid-ranks. Per-sample metrics
(ranking loss, LRAP) skip rows whose truth is all-0 or all-1; macro metrics
skip label columns that are all-0 or all-1. Values live in [0, 1]; tables
multiply by 100.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

METRIC_NAMES = (
    "ranking_loss", "hamming_loss", "macro_auc", "micro_auc", "macro_ap", "micro_ap", "lrap",
)
LOWER_IS_BETTER = frozenset({"ranking_loss", "hamming_loss"})
ABLATION_METRICS = ("macro_auc", "macro_ap", "lrap")


class DegenerateBatchError(ValueError):
    pass


def _check(scores, truth):
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth)
    if scores.shape != truth.shape or scores.ndim != 2:
        raise ValueError(f"scores {scores.shape} and truth {truth.shape} must be equal 2-d shapes")
    if not np.isin(truth, (0, 1)).all():
        raise ValueError("truth must be binary")
    return scores, truth.astype(bool)


def _degenerate(truth: np.ndarray, axis: int) -> np.ndarray:
    s = truth.sum(axis=axis)
    return (s == 0) | (s == truth.shape[axis])


def _auc_columns(scores: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Mann-Whitney AUC for each column, via mid-ranks."""
    ranks = rankdata(scores, method="average", axis=0)
    n_pos = truth.sum(axis=0)
    n_neg = truth.shape[0] - n_pos
    rank_sum = np.where(truth, ranks, 0.0).sum(axis=0)
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def ranking_loss(scores, truth) -> float:
    scores, truth = _check(scores, truth)
    keep = ~_degenerate(truth, axis=1)
    if not keep.any():
        raise DegenerateBatchError("ranking_loss: every sample is all-0 or all-1")
    return float(np.mean(1.0 - _auc_columns(scores[keep].T, truth[keep].T)))


def hamming_loss(scores, truth, threshold: float = 0.5) -> float:
    scores, truth = _check(scores, truth)
    return float(np.mean((scores >= threshold) != truth))


def macro_auc(scores, truth) -> float:
    scores, truth = _check(scores, truth)
    keep = ~_degenerate(truth, axis=0)
    if not keep.any():
        raise DegenerateBatchError("macro_auc: every label is all-0 or all-1")
    return float(np.mean(_auc_columns(scores[:, keep], truth[:, keep])))


def micro_auc(scores, truth) -> float:
    scores, truth = _check(scores, truth)
    flat_s, flat_t = scores.reshape(-1, 1), truth.reshape(-1, 1)
    if _degenerate(flat_t, axis=0)[0]:
        raise DegenerateBatchError("micro_auc: need at least one positive and one negative")
    return float(_auc_columns(flat_s, flat_t)[0])


def average_precision(scores: np.ndarray, truth: np.ndarray) -> float:
    """Step-sum AP over a descending sweep; tied scores enter as one step."""
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], truth[order]
    ends = np.append(np.nonzero(np.diff(s))[0], s.size - 1)
    tp = np.cumsum(y)[ends]
    precision = tp / (ends + 1.0)
    recall = tp / tp[-1]
    return float(np.sum(np.diff(recall, prepend=0.0) * precision))


def macro_ap(scores, truth) -> float:
    scores, truth = _check(scores, truth)
    keep = np.nonzero(~_degenerate(truth, axis=0))[0]
    if keep.size == 0:
        raise DegenerateBatchError("macro_ap: every label is all-0 or all-1")
    return float(np.mean([average_precision(scores[:, j], truth[:, j]) for j in keep]))


def micro_ap(scores, truth) -> float:
    scores, truth = _check(scores, truth)
    if truth.all() or not truth.any():
        raise DegenerateBatchError("micro_ap: need at least one positive and one negative")
    return average_precision(scores.ravel(), truth.ravel())


def lrap(scores, truth) -> float:
    """Label ranking average precision with mid-ranks.

    For a positive label j the precision is (mid-rank of j among positives) /
    (mid-rank of j among all labels), both ranks descending by score, so a
    group of tied positives at the top still scores exactly 1.
    """
    scores, truth = _check(scores, truth)
    keep = ~_degenerate(truth, axis=1)
    if not keep.any():
        raise DegenerateBatchError("lrap: no sample has both positive and negative labels")
    s, t = scores[keep], truth[keep]
    rank_all = rankdata(-s, method="average", axis=1)
    rank_pos = rankdata(np.where(t, -s, np.inf), method="average", axis=1)
    prec = np.where(t, rank_pos / rank_all, 0.0)
    return float(np.mean(prec.sum(axis=1) / t.sum(axis=1)))


@dataclass
class MetricsReport:
    ranking_loss: float
    hamming_loss: float
    macro_auc: float
    micro_auc: float
    macro_ap: float
    micro_ap: float
    lrap: float
    skipped_labels: list = field(default_factory=list)
    skipped_samples: int = 0

    def values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}

    def percent(self) -> dict[str, float]:
        return {name: 100.0 * v for name, v in self.values().items()}

    def to_json(self) -> dict:
        out = self.values()
        out["skipped_labels"] = list(self.skipped_labels)
        out["skipped_samples"] = self.skipped_samples
        return out


def compute_metrics(scores, truth, threshold: float = 0.5) -> MetricsReport:
    scores, truth = _check(scores, truth)
    return MetricsReport(
        ranking_loss=ranking_loss(scores, truth),
        hamming_loss=hamming_loss(scores, truth, threshold),
        macro_auc=macro_auc(scores, truth),
        micro_auc=micro_auc(scores, truth),
        macro_ap=macro_ap(scores, truth),
        micro_ap=micro_ap(scores, truth),
        lrap=lrap(scores, truth),
        skipped_labels=[int(j) for j in np.nonzero(_degenerate(truth, axis=0))[0]],
        skipped_samples=int(_degenerate(truth, axis=1).sum()),
    )


def better(metric: str, a: float, b: float) -> bool:
    """True when ``a`` strictly improves on ``b`` for ``metric``."""
    return a < b if metric in LOWER_IS_BETTER else a > b


def evaluate(model, graph, adj, node_ids) -> MetricsReport:
    """Metrics of sigmoid(logits) on ``node_ids`` with the model in eval mode."""
    from .tensor import sigmoid_array

    node_ids = np.asarray(node_ids, dtype=np.int64)
    if node_ids.size == 0:
        raise ValueError("evaluate needs a non-empty node set")
    logits = model.forward(graph, adj, "eval").value
    return compute_metrics(sigmoid_array(logits[node_ids]), graph.labels[node_ids])
