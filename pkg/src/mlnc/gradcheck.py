"""Central finite-difference check of model gradients.

Where a perturbation flips a ReLU's active set the function is not smooth on
the stencil; such coordinates fall back to a second-order one-sided stencil
on the side that keeps the active set, and are counted as ``kinks``. A
coordinate whose both sides flip is reported as ``skipped``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tape

REL_FLOOR = 1e-6


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_param: str
    checked: int
    kinks: int
    skipped: int


def rel_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), REL_FLOOR)


def _masks_equal(a, b) -> bool:
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def check_model_gradients(model, graph, adj, target_rows, h: float = 1e-5) -> GradCheckResult:
    """Compare tape gradients of summed BCE against finite differences, all params.

    Runs in train mode; the model must have dropout 0 so the loss is
    deterministic.
    """
    if model.config.dropout_rate != 0:
        raise ValueError("gradient check requires dropout_rate = 0")

    def loss_and_masks():
        tape = Tape()
        logits = model.forward(graph, adj, "train", tape=tape)
        loss = tape.bce_with_logits(logits, graph.labels, target_rows)
        return loss, tape

    loss, tape = loss_and_masks()
    tape.backward(loss)
    analytic = {name: p.grad.copy() for name, p in model.params.items()}
    base_masks = tape.relu_masks

    def f(p, idx, delta):
        old = p.value[idx]
        p.value[idx] = old + delta
        try:
            loss, tape = loss_and_masks()
        finally:
            p.value[idx] = old
        return loss.value[0, 0], tape.relu_masks

    worst, worst_name = 0.0, ""
    checked = kinks = skipped = 0
    for name, p in model.params.items():
        for idx in np.ndindex(p.value.shape):
            fp, mp = f(p, idx, h)
            fm, mm = f(p, idx, -h)
            ok_p = _masks_equal(mp, base_masks)
            ok_m = _masks_equal(mm, base_masks)
            if ok_p and ok_m:
                num = (fp - fm) / (2 * h)
            else:
                sign = 1.0 if ok_p else -1.0
                f1, m1 = fp, mp
                if not (ok_p or ok_m):
                    skipped += 1
                    continue
                if not ok_p:
                    f1 = fm
                f2, m2 = f(p, idx, 2 * sign * h)
                f0 = loss.value[0, 0]
                if not _masks_equal(m2, base_masks):
                    skipped += 1
                    continue
                kinks += 1
                num = sign * (-3 * f0 + 4 * f1 - f2) / (2 * h)
            err = rel_error(analytic[name][idx], num)
            checked += 1
            if err > worst:
                worst, worst_name = err, f"{name}{list(idx)}"
    return GradCheckResult(worst, worst_name, checked, kinks, skipped)
