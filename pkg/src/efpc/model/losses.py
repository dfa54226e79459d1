"""Cross-entropy losses over per-position (preserve, discard) probabilities.

Three variants differ only in how the instruction prefix is handled:
``agnostic`` has no prefix, ``drop`` averages over every position with the
prefix labeled discard, and ``mask`` averages over original positions
only. All three share one accumulation path, so the two prefixed variants
collapse to the agnostic loss at boundary 0 with exact float equality.

Probabilities are clamped to [1e-12, 1−1e-12] before the log, and the
gradient is defined as zero wherever the clamp is active.
"""

from __future__ import annotations

import numpy as np

from ..errors import LengthMismatch

PROB_FLOOR = 1e-12
PROB_CEIL = 1.0 - 1e-12

# probability column layout: column 0 = preserve (label 1), column 1 = discard
PRESERVE_COL = 0
DISCARD_COL = 1


def _mean_ce(probs: np.ndarray, labels: np.ndarray, start: int) -> float:
    """Mean clamped CE over rows start..end against 0/1 labels."""
    block = probs[start:]
    p_true = np.where(labels == 1, block[:, PRESERVE_COL], block[:, DISCARD_COL])
    return float(np.mean(-np.log(np.clip(p_true, PROB_FLOOR, PROB_CEIL))))


def _check(probs, labels, boundary: int) -> tuple[np.ndarray, np.ndarray]:
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if probs.ndim != 2 or probs.shape[1] != 2:
        raise LengthMismatch("probs must be a (length, 2) array")
    if boundary + len(labels) != len(probs):
        raise LengthMismatch(
            f"{len(probs)} positions need {len(probs) - boundary} labels, "
            f"got {len(labels)}"
        )
    return probs, labels


def loss_agnostic(probs, labels) -> float:
    """Mean CE over all positions; no instruction prefix exists."""
    probs, labels = _check(probs, labels, 0)
    return _mean_ce(probs, labels, 0)


def loss_drop(probs, labels, boundary: int) -> float:
    """Mean CE over every position, prefix positions labeled discard."""
    probs, labels = _check(probs, labels, boundary)
    full = np.concatenate([np.zeros(boundary, dtype=labels.dtype), labels])
    return _mean_ce(probs, full, 0)


def loss_mask(probs, labels, boundary: int) -> float:
    """Mean CE over original positions only; prefix rows never contribute."""
    probs, labels = _check(probs, labels, boundary)
    return _mean_ce(probs, labels, boundary)


def ce_rows(variant: str, labels: np.ndarray, boundary: int):
    """Included row range and full label vector for a loss variant.

    Returns (start_row, labels_for_rows): the loss averages rows from
    start_row on against labels_for_rows. Shared by the losses above and
    the analytic backward pass so both see the same definition.
    """
    labels = np.asarray(labels)
    if variant == "agnostic":
        if boundary != 0:
            raise ValueError("agnostic loss requires boundary 0")
        return 0, labels
    if variant == "drop":
        return 0, np.concatenate([np.zeros(boundary, dtype=labels.dtype), labels])
    if variant == "mask":
        return boundary, labels
    raise ValueError(f"unknown loss variant {variant!r}")


def ce_grad_logits(
    probs: np.ndarray, labels: np.ndarray, start: int
) -> np.ndarray:
    """d(mean clamped CE)/d(logits) for rows start.., zero elsewhere.

    Rows where the true-class probability hit the clamp get zero gradient,
    matching the loss's flat region there.
    """
    total = len(probs)
    count = total - start
    grad = np.zeros_like(probs)
    block = probs[start:]
    onehot = np.zeros_like(block)
    rows = np.arange(count)
    cols = np.where(labels == 1, PRESERVE_COL, DISCARD_COL)
    onehot[rows, cols] = 1.0
    p_true = block[rows, cols]
    live = ((p_true > PROB_FLOOR) & (p_true < PROB_CEIL)).astype(block.dtype)
    grad[start:] = (block - onehot) * live[:, None] / count
    return grad
