"""Plackett-Luce permutation probabilities and the listwise softmax loss."""

from __future__ import annotations

import itertools

import numpy as np

MAX_ENUM_N = 8


def _positive(y) -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64)
    if arr.size == 0 or np.any(~(arr > 0)):
        raise ValueError("Plackett-Luce parameters must be strictly positive")
    return arr


def pl_permutation_prob(perm, y) -> float:
    """Pr[perm | y]; ``perm[r]`` is the item placed at rank r (0-based)."""
    y = _positive(y)
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(y.size)):
        raise ValueError("perm must be a permutation of range(len(y))")
    ordered = y[perm]
    tails = np.cumsum(ordered[::-1])[::-1]
    return float(np.prod(ordered / tails))


def pl_top1(y) -> np.ndarray:
    y = _positive(y)
    return y / y.sum()


def pl_prob_in_topk(y, k: int) -> np.ndarray:
    """Pr[item i lands in the first k positions], by enumerating all N! orders."""
    y = _positive(y)
    n = y.size
    if n > MAX_ENUM_N:
        raise ValueError(f"exhaustive enumeration supports N <= {MAX_ENUM_N}, got {n}")
    if not 1 <= k <= n:
        raise ValueError("k must lie in [1, N]")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    ordered = y[perms]
    tails = np.cumsum(ordered[:, ::-1], axis=1)[:, ::-1]
    probs = np.prod(ordered / tails, axis=1)
    out = np.zeros(n)
    np.add.at(out, perms[:, :k].ravel(), np.repeat(probs, k))
    return out


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _label_dist(y: np.ndarray) -> np.ndarray:
    y = _positive(y)
    return y / y.sum(axis=-1, keepdims=True)


def listwise_loss(logits, y) -> float:
    """Cross entropy between the top-1 distributions of ``y`` and ``softmax(logits)``.

    2-D inputs are a batch of auctions (one per row); the loss is averaged.
    """
    f = np.asarray(logits, dtype=np.float64)
    p_y = _label_dist(np.asarray(y, dtype=np.float64))
    if f.shape != p_y.shape:
        raise ValueError("logits and labels must have the same shape")
    per_sample = -(p_y * _log_softmax(f)).sum(axis=-1)
    return float(np.mean(per_sample))


def listwise_loss_grad(logits, y) -> np.ndarray:
    """d loss / d logits = softmax(logits) - y / sum(y) (divided by batch size)."""
    f = np.asarray(logits, dtype=np.float64)
    p_y = _label_dist(np.asarray(y, dtype=np.float64))
    grad = np.exp(_log_softmax(f)) - p_y
    if f.ndim == 2:
        grad /= f.shape[0]
    return grad


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    return float(np.mean((pred - np.asarray(target, dtype=np.float64)) ** 2))


def mse_loss_grad(pred, target) -> np.ndarray:
    pred = np.asarray(pred, dtype=np.float64)
    return 2.0 * (pred - np.asarray(target, dtype=np.float64)) / pred.size
