"""Pre-auction subset selection: GDY, PAS (exact / Monte Carlo), SimPA oracles."""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .auction import rank_by_score
from .env import SimpaInstance, sample_joint, sample_realizations

MAX_OUTCOMES = 10**6
MAX_SUBSETS = 10**5


class StateSpaceTooLarge(ValueError):
    """Exact enumeration would exceed the configured size limit."""


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple
    scores: np.ndarray
    strategy_name: str = ""


@dataclass(frozen=True)
class PasScores:
    probs: np.ndarray
    stderr: Optional[np.ndarray] = None


def select_by_scores(scores, m: int, strategy_name: str = "scores") -> SelectionResult:
    """Top-``m`` ads by score, ties to the smaller index."""
    s = np.asarray(scores, dtype=np.float64)
    order = rank_by_score(s)
    return SelectionResult(tuple(int(i) for i in order[: min(m, s.size)]), s, strategy_name)


def select_gdy(bids, coarse_ctrs, m: int) -> SelectionResult:
    b = np.asarray(bids, dtype=np.float64)
    c = np.asarray(coarse_ctrs, dtype=np.float64)
    if b.shape != c.shape:
        raise ValueError("bids and coarse_ctrs must have equal length")
    return select_by_scores(b * c, m, "gdy")


def outcome_table(instance: SimpaInstance, subset: Optional[Sequence[int]] = None,
                  limit: int = MAX_OUTCOMES):
    """Every joint realization of the (subset of) ads' scores with its probability.

    Returns ``(scores, probs)`` with ``scores`` of shape (R, len(subset)).
    """
    idx = list(range(instance.n_ads)) if subset is None else [int(i) for i in subset]
    bids = instance.bids[idx]
    if instance.is_joint:
        table = instance.joint
        if table.probs.size > limit:
            raise StateSpaceTooLarge(f"joint table has {table.probs.size} rows > {limit}")
        return table.ctrs[:, idx] * bids, table.probs
    rows = instance.n_outcomes(idx)
    if rows > limit:
        raise StateSpaceTooLarge(
            f"{rows} joint outcomes exceed the enumeration limit {limit}; use the Monte Carlo path"
        )
    if not idx:
        return np.zeros((1, 0)), np.ones(1)
    dists = [instance.dists[i] for i in idx]
    grids = np.meshgrid(*[np.arange(d.size) for d in dists], indexing="ij")
    scores = np.empty((rows, len(idx)))
    probs = np.ones(rows)
    for col, (d, g) in enumerate(zip(dists, grids)):
        flat = g.ravel()
        scores[:, col] = d.values[flat] * bids[col]
        probs *= d.probs[flat]
    return scores, probs


def _top_k_membership(scores: np.ndarray, k: int) -> np.ndarray:
    """Boolean (R, N) mask of top-k membership per row, ties to smaller index."""
    order = np.argsort(-scores, axis=1, kind="stable")[:, :k]
    mask = np.zeros(scores.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=1)
    return mask


def _row_sum_top_k(scores: np.ndarray, k: int) -> np.ndarray:
    n = scores.shape[1]
    if n == 0:
        return np.zeros(scores.shape[0])
    if n <= k:
        return scores.sum(axis=1)
    return np.partition(scores, n - k, axis=1)[:, n - k:].sum(axis=1)


def pas_exact(instance: SimpaInstance) -> PasScores:
    """Pr[ad i is among the realized top-K] by exhaustive enumeration."""
    scores, probs = outcome_table(instance)
    mask = _top_k_membership(scores, instance.k)
    return PasScores(probs @ mask)


def pas_monte_carlo(instance: SimpaInstance, n_samples: int,
                    rng: np.random.Generator) -> PasScores:
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if instance.is_joint:
        ctrs = sample_joint(instance, n_samples, rng)
    else:
        ctrs = sample_realizations(instance.dists, n_samples, rng)
    mask = _top_k_membership(ctrs * instance.bids, instance.k)
    p = mask.mean(axis=0)
    return PasScores(p, np.sqrt(p * (1 - p) / n_samples))


def expected_recall(subset: Sequence[int], instance: SimpaInstance) -> float:
    """E[|S ∩ top-K|] by direct enumeration (no PAS shortcut)."""
    scores, probs = outcome_table(instance)
    mask = _top_k_membership(scores, instance.k)
    idx = [int(i) for i in subset]
    return float(probs @ mask[:, idx].sum(axis=1))


def simpa_objective(subset: Sequence[int], instance: SimpaInstance) -> float:
    """E[SumTopK of b*ctr over ``subset``] by exact enumeration."""
    idx = sorted(set(int(i) for i in subset))
    if not idx:
        return 0.0
    scores, probs = outcome_table(instance, idx)
    return float(probs @ _row_sum_top_k(scores, instance.k))


def simpa_objective_mc(subset: Sequence[int], instance: SimpaInstance, n_samples: int,
                       rng: np.random.Generator) -> tuple:
    """Monte Carlo estimate of the SimPA objective; returns (mean, stderr)."""
    idx = sorted(set(int(i) for i in subset))
    if not idx:
        return 0.0, 0.0
    if instance.is_joint:
        ctrs = sample_joint(instance, n_samples, rng)[:, idx]
    else:
        ctrs = sample_realizations([instance.dists[i] for i in idx], n_samples, rng)
    vals = _row_sum_top_k(ctrs * instance.bids[idx], instance.k)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0


class _PanelObjective:
    """SimPA objective over a fixed weighted panel of score realizations.

    The panel is either the exact outcome table or a common-random-numbers
    Monte Carlo sample, so subset evaluations are mutually consistent.
    """

    def __init__(self, scores: np.ndarray, weights: np.ndarray, k: int):
        self.scores = scores
        self.weights = weights
        self.k = k

    def __call__(self, subset) -> float:
        idx = list(subset)
        if not idx:
            return 0.0
        return float(self.weights @ _row_sum_top_k(self.scores[:, idx], self.k))


def _panel(instance: SimpaInstance, n_samples: Optional[int], rng) -> _PanelObjective:
    if n_samples is None:
        scores, probs = outcome_table(instance)
        return _PanelObjective(scores, probs, instance.k)
    if rng is None:
        raise ValueError("Monte Carlo evaluation needs an rng")
    if instance.is_joint:
        ctrs = sample_joint(instance, n_samples, rng)
    else:
        ctrs = sample_realizations(instance.dists, n_samples, rng)
    return _PanelObjective(ctrs * instance.bids, np.full(n_samples, 1.0 / n_samples), instance.k)


def brute_force_optimal_subset(instance: SimpaInstance) -> tuple:
    """Exhaustive SimPA maximizer over size-min(M, N) subsets.

    Ties go to the lexicographically smallest subset.
    """
    n, m = instance.n_ads, min(instance.m, instance.n_ads)
    if math.comb(n, m) > MAX_SUBSETS:
        raise StateSpaceTooLarge(f"C({n},{m}) subsets exceed the limit {MAX_SUBSETS}")
    objective = _panel(instance, None, None)
    best, best_val = (), -math.inf
    for combo in itertools.combinations(range(n), m):
        val = objective(combo)
        if val > best_val + 1e-12:
            best, best_val = combo, val
    return best, max(best_val, 0.0)


def lazy_greedy_subset(instance: SimpaInstance, n_samples: Optional[int] = None,
                       rng: Optional[np.random.Generator] = None) -> tuple:
    """Greedy marginal-gain selection with lazy (stale upper bound) updates.

    Exact enumeration by default; pass ``n_samples`` and ``rng`` to work on
    a fixed Monte Carlo panel instead.
    """
    objective = _panel(instance, n_samples, rng)
    m = min(instance.m, instance.n_ads)
    chosen: list = []
    current = 0.0
    # entries: (-gain, ad, round the gain was computed in)
    heap = [(-objective([i]), i, 0) for i in range(instance.n_ads)]
    heapq.heapify(heap)
    for rnd in range(m):
        while True:
            neg_gain, ad, stamp = heapq.heappop(heap)
            if stamp == rnd:
                chosen.append(ad)
                current += -neg_gain
                break
            gain = objective(chosen + [ad]) - current
            heapq.heappush(heap, (-gain, ad, rnd))
        current = objective(chosen)
    return tuple(chosen), current
