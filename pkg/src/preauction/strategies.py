"""Named pre-auction strategies usable by the experiment runner and IC tests."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .auction import AuctionInstance
from .learning.scorer import ScorerParams
from .learning.training import feature_matrix, model_scores
from .selection import (
    SelectionResult,
    brute_force_optimal_subset,
    lazy_greedy_subset,
    pas_exact,
    pas_monte_carlo,
    select_by_scores,
)


class Strategy:
    """Scores every ad of an auction; the top-M scores enter the second stage."""

    name = "strategy"
    deterministic = True

    def scores(self, instance: AuctionInstance) -> np.ndarray:
        raise NotImplementedError

    def select(self, instance: AuctionInstance) -> SelectionResult:
        return select_by_scores(self.scores(instance), instance.subset_size, self.name)

    def sweep_scores(self, instance: AuctionInstance, ad: int, bids) -> np.ndarray:
        """Scores with ad ``ad`` bidding each value of ``bids``: shape (F, N)."""
        return np.stack([self.scores(instance.with_bid(ad, b)) for b in bids])


class GdyStrategy(Strategy):
    name = "gdy"

    def scores(self, instance):
        return instance.bids * instance.coarse_ctrs

    def sweep_scores(self, instance, ad, bids):
        out = np.tile(self.scores(instance), (len(bids), 1))
        out[:, ad] = np.asarray(bids) * instance.coarse_ctrs[ad]
        return out


class ConstantStrategy(Strategy):
    """Ignores bids entirely; useful as an IC-test edge case."""

    name = "constant"

    def scores(self, instance):
        return np.zeros(instance.n_ads)


class PasExactStrategy(Strategy):
    name = "pas-exact"

    def scores(self, instance):
        return pas_exact(instance.to_simpa()).probs


class PasMonteCarloStrategy(Strategy):
    """Sampled PAS; a fixed seed reuses the same random numbers on every call."""

    name = "pas-mc"

    def __init__(self, n_samples: int = 2000, seed: Optional[int] = 0):
        self.n_samples = n_samples
        self.seed = seed
        self.deterministic = seed is not None

    def scores(self, instance):
        rng = np.random.default_rng(self.seed)
        return pas_monte_carlo(instance.to_simpa(), self.n_samples, rng).probs


class LearnedStrategy(Strategy):
    """A trained scorer (learned PAS, REG or REGCTR)."""

    def __init__(self, params: ScorerParams, name: str = "pas-learned"):
        self.params = params
        self.name = name
        self.include_bid = params.architecture["include_bid"]

    def scores(self, instance):
        x = feature_matrix(instance.bids, instance.partial_matrix,
                           instance.user_features, self.include_bid)
        return model_scores(self.params, x, instance.bids)

    def sweep_scores(self, instance, ad, bids):
        sweep = np.tile(instance.bids, (len(bids), 1))
        sweep[:, ad] = bids
        x = feature_matrix(sweep, instance.partial_matrix, instance.user_features, self.include_bid)
        return model_scores(self.params, x, sweep)


class _SubsetStrategy(Strategy):
    """Set-level optimizers: the score is the reverse pick order, 0 if unpicked."""

    def _subset(self, instance):
        raise NotImplementedError

    def scores(self, instance):
        chosen, _ = self._subset(instance)
        s = np.zeros(instance.n_ads)
        for pos, ad in enumerate(chosen):
            s[ad] = len(chosen) - pos
        return s

    def select(self, instance):
        chosen, _ = self._subset(instance)
        return SelectionResult(tuple(chosen), self.scores(instance), self.name)


class GreedySubmodularStrategy(_SubsetStrategy):
    name = "greedy-submodular"

    def __init__(self, n_samples: Optional[int] = None, seed: Optional[int] = 0):
        self.n_samples = n_samples
        self.seed = seed
        self.deterministic = n_samples is None or seed is not None

    def _subset(self, instance):
        rng = None if self.n_samples is None else np.random.default_rng(self.seed)
        return lazy_greedy_subset(instance.to_simpa(), self.n_samples, rng)


class OracleStrategy(_SubsetStrategy):
    name = "oracle"

    def _subset(self, instance):
        return brute_force_optimal_subset(instance.to_simpa())


STRATEGY_NAMES = ("gdy", "pas-exact", "pas-mc", "pas-learned", "reg", "regctr",
                  "greedy-submodular", "oracle")
LEARNED = {"pas-learned", "reg", "regctr"}


def build_strategy(name: str, params: Optional[ScorerParams] = None, **options) -> Strategy:
    """Instantiate a registered strategy; learned ones need trained ``params``."""
    if name == "gdy":
        return GdyStrategy()
    if name == "pas-exact":
        return PasExactStrategy()
    if name == "pas-mc":
        return PasMonteCarloStrategy(**options)
    if name == "greedy-submodular":
        return GreedySubmodularStrategy(**options)
    if name == "oracle":
        return OracleStrategy()
    if name == "constant":
        return ConstantStrategy()
    if name in LEARNED:
        if params is None:
            raise ValueError(f"strategy {name!r} needs trained parameters")
        return LearnedStrategy(params, name)
    raise ValueError(f"unknown strategy {name!r}; known: {', '.join(STRATEGY_NAMES)}")
