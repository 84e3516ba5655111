"""Second-stage machinery: ranking, SumTopK, GSP allocation/payments and metrics.

Ad indices are 0-based positions in the candidate list. Slots are reported
1-based (slot 0 means the ad lost), matching the usual auction convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np


def _as_float_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def sum_top_k(values, k: int) -> float:
    """Sum of the ``k`` largest entries of ``values`` (all of them if fewer)."""
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    arr = _as_float_array(values, "values")
    if arr.size == 0:
        return 0.0
    if arr.size <= k:
        return float(arr.sum())
    return float(np.partition(arr, arr.size - k)[arr.size - k:].sum())


def rank_by_score(scores) -> np.ndarray:
    """Indices sorted by descending score; ties go to the smaller index."""
    arr = _as_float_array(scores, "scores")
    if np.isnan(arr).any():
        raise ValueError("scores contain NaN")
    # stable sort keeps ascending index order inside runs of equal keys
    return np.argsort(-arr, kind="stable")


def top_k_indices(scores, k: int) -> np.ndarray:
    return rank_by_score(scores)[:k]


@dataclass(frozen=True)
class AdRecord:
    ad_id: int
    bid: float
    partial_features: np.ndarray = field(default_factory=lambda: np.zeros(0))
    ctr_dist_id: int = 0

    def __post_init__(self):
        if not np.isfinite(self.bid) or self.bid < 0:
            raise ValueError(f"ad {self.ad_id}: bid must be finite and >= 0, got {self.bid}")
        object.__setattr__(
            self, "partial_features", np.asarray(self.partial_features, dtype=np.float64)
        )


@dataclass(frozen=True)
class AuctionInstance:
    """One page view: N candidate ads, the user context and the (N, M, K) shape.

    ``ctr_table`` holds the refined-CTR distributions referenced by each ad's
    ``ctr_dist_id``. ``realized_ctrs`` is the refined CTR actually observed
    for every ad (offline label / evaluation ground truth), or None.
    """

    ads: tuple
    user_features: np.ndarray
    n_slots: int
    subset_size: int
    ctr_table: tuple = ()
    realized_ctrs: Optional[np.ndarray] = None
    auction_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "ads", tuple(self.ads))
        object.__setattr__(
            self, "user_features", np.asarray(self.user_features, dtype=np.float64)
        )
        n = len(self.ads)
        if not (1 <= self.n_slots <= self.subset_size <= n):
            raise ValueError(
                f"need 1 <= K <= M <= N, got K={self.n_slots}, M={self.subset_size}, N={n}"
            )
        ids = [ad.ad_id for ad in self.ads]
        if len(set(ids)) != n:
            raise ValueError("ad_id values must be unique within an auction")
        for ad in self.ads:
            if not 0 <= ad.ctr_dist_id < len(self.ctr_table):
                raise ValueError(f"ad {ad.ad_id}: ctr_dist_id {ad.ctr_dist_id} does not resolve")
        if self.realized_ctrs is not None:
            rc = np.asarray(self.realized_ctrs, dtype=np.float64)
            if rc.shape != (n,):
                raise ValueError("realized_ctrs must have one entry per ad")
            if not np.all((rc >= 0) & (rc <= 1)):
                raise ValueError("realized_ctrs must lie in [0, 1]")
            object.__setattr__(self, "realized_ctrs", rc)

    @property
    def n_ads(self) -> int:
        return len(self.ads)

    @property
    def bids(self) -> np.ndarray:
        return np.array([ad.bid for ad in self.ads], dtype=np.float64)

    @property
    def dists(self) -> list:
        return [self.ctr_table[ad.ctr_dist_id] for ad in self.ads]

    @property
    def coarse_ctrs(self) -> np.ndarray:
        """Coarse estimator output per ad (first partial feature)."""
        return np.array([ad.partial_features[0] for ad in self.ads], dtype=np.float64)

    @property
    def partial_matrix(self) -> np.ndarray:
        return np.vstack([ad.partial_features for ad in self.ads])

    def with_bid(self, index: int, bid: float) -> "AuctionInstance":
        """Copy with ad ``index`` bidding ``bid``; everything else unchanged."""
        ads = list(self.ads)
        old = ads[index]
        ads[index] = AdRecord(old.ad_id, float(bid), old.partial_features, old.ctr_dist_id)
        return AuctionInstance(
            ads, self.user_features, self.n_slots, self.subset_size,
            self.ctr_table, self.realized_ctrs, self.auction_id,
        )

    def to_simpa(self, k: Optional[int] = None, m: Optional[int] = None):
        from .env import SimpaInstance

        return SimpaInstance(
            bids=self.bids,
            dists=tuple(self.dists),
            m=self.subset_size if m is None else m,
            k=self.n_slots if k is None else k,
        )


@dataclass(frozen=True)
class AuctionOutcome:
    """GSP result. ``winners[j]`` holds slot j+1; payments are per click."""

    winners: tuple
    payments_per_click: tuple
    expected_revenue: float

    @property
    def allocation(self) -> dict:
        return {slot + 1: ad for slot, ad in enumerate(self.winners)}

    def slot_of(self, ad: int) -> int:
        for slot, winner in enumerate(self.winners):
            if winner == ad:
                return slot + 1
        return 0


@dataclass(frozen=True)
class MetricsReport:
    swr: float
    recall: float
    revr: float
    k: int


def _check_bids_ctrs(bids, ctrs):
    b = _as_float_array(bids, "bids")
    c = _as_float_array(ctrs, "ctrs")
    if b.shape != c.shape or b.size == 0:
        raise ValueError("bids and ctrs must be non-empty and of equal length")
    if np.any(b < 0) or not np.all(np.isfinite(b)):
        raise ValueError("bids must be finite and nonnegative")
    if np.any((c < 0) | (c > 1)) or not np.all(np.isfinite(c)):
        raise ValueError("ctrs must lie in [0, 1]")
    return b, c


def gsp_run(bids, ctrs, k: int) -> AuctionOutcome:
    """Generalized second price auction with critical-price payments.

    The slot-j winner pays ``score[j+1] / ctr[j]`` per click, which makes
    ``payment * ctr`` equal to the runner-up's expected click value.
    """
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    b, c = _check_bids_ctrs(bids, ctrs)
    scores = b * c
    order = rank_by_score(scores)
    n_alloc = min(k, b.size)
    winners = tuple(int(i) for i in order[:n_alloc])
    payments = []
    revenue = 0.0
    for j, ad in enumerate(winners):
        if j + 1 >= b.size:
            payments.append(0.0)
            continue
        runner_up = scores[order[j + 1]]
        revenue += runner_up
        if runner_up == 0.0:
            payments.append(0.0)
        else:
            # runner_up > 0 forces c[ad] > 0 by the ranking
            payments.append(min(runner_up / c[ad], b[ad]))
    return AuctionOutcome(winners, tuple(payments), float(revenue))


def gsp_revenue(scores, k: int) -> float:
    """REV(A) = sum over the top-k slots of the next-ranked score."""
    s = np.sort(_as_float_array(scores, "scores"))[::-1]
    return float(s[1:k + 1].sum())


def expected_social_welfare(bids, ctrs, k: int) -> float:
    b, c = _check_bids_ctrs(bids, ctrs)
    return sum_top_k(b * c, k)


def compute_metrics(selected: Iterable[int], instance, realized_ctrs, k: int) -> MetricsReport:
    """SWr@K, Recall@K and REVr@K of a pre-auction selection.

    ``instance`` is an AuctionInstance or a plain bid vector.
    """
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    bids = instance.bids if isinstance(instance, AuctionInstance) else instance
    b, c = _check_bids_ctrs(bids, realized_ctrs)
    sel = np.array(sorted(set(int(i) for i in selected)), dtype=np.int64)
    if sel.size == 0:
        raise ValueError("selection must contain at least one ad")
    if sel.min() < 0 or sel.max() >= b.size:
        raise ValueError("selection references ads outside the instance")
    scores = b * c
    top_all = top_k_indices(scores, k)
    top_sel = sel[top_k_indices(scores[sel], k)]

    welfare_all = scores[top_all].sum()
    welfare_sel = scores[top_sel].sum()
    if welfare_all == 0.0:
        if welfare_sel != 0.0:
            raise ValueError("degenerate instance: zero optimal welfare but nonzero selected welfare")
        swr = 1.0
    else:
        swr = float(welfare_sel / welfare_all)

    recall = len(set(top_sel.tolist()) & set(top_all.tolist())) / k

    rev_all = gsp_revenue(scores, k)
    rev_sel = gsp_revenue(scores[sel], k)
    revr = 1.0 if rev_all == 0.0 else float(rev_sel / rev_all)
    return MetricsReport(swr=swr, recall=recall, revr=revr, k=k)
