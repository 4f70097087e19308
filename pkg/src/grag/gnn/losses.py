"""Listwise cross-entropy and pairwise hinge losses over one question's scores."""

from __future__ import annotations

import numpy as np


def ce_loss(scores: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy summed over positives.

    Returns ``(loss, dloss/dscores)``. A question without positives gives zero
    loss and a zero gradient.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if s.shape != y.shape or s.ndim != 1 or s.size == 0:
        raise ValueError("scores and labels must be equal-length non-empty vectors")
    n_pos = y.sum()
    if n_pos == 0:
        return 0.0, np.zeros_like(s)
    shifted = s - s.max()
    log_z = np.log(np.exp(shifted).sum())
    log_p = shifted - log_z
    loss = float(-(y * log_p).sum())
    grad = n_pos * np.exp(log_p) - y
    return loss, grad


def pairwise_ranking_loss(s_pos: float, s_neg: float) -> tuple[float, tuple[float, float]]:
    """Hinge ``max(0, 1 - (s_pos - s_neg))`` with gradients ``(d/ds_pos, d/ds_neg)``.

    The subgradient at the hinge point is 0.
    """
    margin = 1.0 - (s_pos - s_neg)
    if margin > 0:
        return margin, (-1.0, 1.0)
    return 0.0, (0.0, 0.0)


def ranking_pairs(labels: np.ndarray, cap: int | None, rng: np.random.Generator | None = None) -> np.ndarray:
    """All (positive, negative) index pairs, uniformly subsampled down to ``cap``."""
    y = np.asarray(labels)
    pos = np.nonzero(y > 0)[0]
    neg = np.nonzero(y <= 0)[0]
    pairs = np.array([(i, j) for i in pos for j in neg], dtype=np.int64).reshape(-1, 2)
    if cap is not None and len(pairs) > cap:
        if rng is None:
            raise ValueError("a generator is needed to subsample pairs")
        keep = np.sort(rng.choice(len(pairs), size=cap, replace=False))
        pairs = pairs[keep]
    return pairs


def mean_pairwise_loss(scores: np.ndarray, pairs: np.ndarray) -> tuple[float, np.ndarray]:
    """Average hinge loss over ``pairs`` and its gradient wrt the score vector."""
    s = np.asarray(scores, dtype=np.float64)
    grad = np.zeros_like(s)
    if len(pairs) == 0:
        return 0.0, grad
    margins = 1.0 - (s[pairs[:, 0]] - s[pairs[:, 1]])
    active = margins > 0
    loss = float(np.where(active, margins, 0.0).sum() / len(pairs))
    w = active / len(pairs)
    np.add.at(grad, pairs[:, 0], -w)
    np.add.at(grad, pairs[:, 1], w)
    return loss, grad
