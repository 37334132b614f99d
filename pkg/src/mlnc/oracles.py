"""Brute-force reference metrics by explicit pair and rank enumeration.

Deliberately loop-based and independent of ``metrics``: nothing here sorts
or calls a rank routine.
"""
from __future__ import annotations


def _pair_credit(hi: float, lo: float) -> float:
    if hi > lo:
        return 1.0
    if hi == lo:
        return 0.5
    return 0.0


def _auc(scores, truth) -> float:
    pos = [s for s, y in zip(scores, truth) if y]
    neg = [s for s, y in zip(scores, truth) if not y]
    total = sum(_pair_credit(p, n) for p in pos for n in neg)
    return total / (len(pos) * len(neg))


def _rows(m):
    return [list(map(float, r)) for r in m]


def _cols(m):
    rows = _rows(m)
    return [list(c) for c in zip(*rows)]


def _mixed(truth_vec) -> bool:
    return 0 < sum(truth_vec) < len(truth_vec)


def ranking_loss(scores, truth) -> float:
    vals = []
    for s, t in zip(_rows(scores), _rows(truth)):
        if not _mixed(t):
            continue
        pos = [x for x, y in zip(s, t) if y]
        neg = [x for x, y in zip(s, t) if not y]
        bad = sum(_pair_credit(n, p) for p in pos for n in neg)
        vals.append(bad / (len(pos) * len(neg)))
    if not vals:
        raise ValueError("no mixed sample")
    return sum(vals) / len(vals)


def hamming_loss(scores, truth, threshold=0.5) -> float:
    wrong = total = 0
    for s, t in zip(_rows(scores), _rows(truth)):
        for x, y in zip(s, t):
            wrong += int((x >= threshold) != bool(y))
            total += 1
    return wrong / total


def macro_auc(scores, truth) -> float:
    vals = [_auc(s, t) for s, t in zip(_cols(scores), _cols(truth)) if _mixed(t)]
    if not vals:
        raise ValueError("no mixed label")
    return sum(vals) / len(vals)


def micro_auc(scores, truth) -> float:
    s = [x for r in _rows(scores) for x in r]
    t = [x for r in _rows(truth) for x in r]
    if not _mixed(t):
        raise ValueError("flattened truth has a single class")
    return _auc(s, t)


def _ap(scores, truth) -> float:
    # walk distinct thresholds from high to low; every item >= threshold is predicted
    n_pos = sum(truth)
    ap = 0.0
    prev_recall = 0.0
    for thr in sorted(set(scores), reverse=True):
        sel = [y for x, y in zip(scores, truth) if x >= thr]
        tp = sum(sel)
        recall = tp / n_pos
        ap += (recall - prev_recall) * (tp / len(sel))
        prev_recall = recall
    return ap


def macro_ap(scores, truth) -> float:
    vals = [_ap(s, t) for s, t in zip(_cols(scores), _cols(truth)) if _mixed(t)]
    if not vals:
        raise ValueError("no mixed label")
    return sum(vals) / len(vals)


def micro_ap(scores, truth) -> float:
    s = [x for r in _rows(scores) for x in r]
    t = [x for r in _rows(truth) for x in r]
    if not _mixed(t):
        raise ValueError("flattened truth has a single class")
    return _ap(s, t)


def _midrank(j, s, members) -> float:
    return 1.0 + sum(_pair_credit(s[k], s[j]) for k in members if k != j)


def lrap(scores, truth) -> float:
    vals = []
    for s, t in zip(_rows(scores), _rows(truth)):
        if not _mixed(t):
            continue
        everyone = range(len(s))
        positives = [k for k in everyone if t[k]]
        precs = [_midrank(j, s, positives) / _midrank(j, s, everyone) for j in positives]
        vals.append(sum(precs) / len(precs))
    if not vals:
        raise ValueError("no mixed sample")
    return sum(vals) / len(vals)


ORACLES = {
    "ranking_loss": ranking_loss,
    "hamming_loss": hamming_loss,
    "macro_auc": macro_auc,
    "micro_auc": micro_auc,
    "macro_ap": macro_ap,
    "micro_ap": micro_ap,
    "lrap": lrap,
}
