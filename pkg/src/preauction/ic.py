"""Bid-perturbation monotonicity tests and GSP condition checks."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .auction import AuctionOutcome, rank_by_score

DEFAULT_FACTORS = tuple(round(0.2 * j, 10) for j in range(1, 11))


def is_monotone_step(entered: Sequence[bool]) -> bool:
    """True iff the entry pattern is F...F T...T (possibly all F or all T)."""
    seen_true = False
    for e in entered:
        if e:
            seen_true = True
        elif seen_true:
            return False
    return True


@dataclass(frozen=True)
class PerturbationTest:
    auction_id: int
    ad_id: int
    factors: tuple
    entered: tuple

    def __post_init__(self):
        if any(f <= 0 for f in self.factors) or any(
            b <= a for a, b in zip(self.factors, self.factors[1:])
        ):
            raise ValueError("factors must be positive and strictly increasing")
        if len(self.entered) != len(self.factors):
            raise ValueError("one entry flag per factor is required")

    @property
    def passed(self) -> bool:
        return is_monotone_step(self.entered)

    @property
    def threshold(self) -> Optional[float]:
        """Smallest factor from which the ad always enters (None if never)."""
        if not self.passed or not any(self.entered):
            return None
        return self.factors[list(self.entered).index(True)]


def _entered_from_scores(scores: np.ndarray, ad: int, m: int) -> list:
    return [bool(ad in rank_by_score(row)[:m]) for row in scores]


def run_perturbation_test(strategy, instance, ad_id: int,
                          factors: Sequence[float] = DEFAULT_FACTORS) -> PerturbationTest:
    """Replay the pre-auction with ad ``ad_id``'s bid scaled by each factor."""
    if not getattr(strategy, "deterministic", True):
        raise ValueError(f"strategy {strategy.name!r} is stochastic without a fixed seed")
    if not 0 <= ad_id < instance.n_ads:
        raise ValueError(f"ad {ad_id} is not part of auction {instance.auction_id}")
    factors = tuple(float(f) for f in factors)
    bids = np.asarray(factors) * instance.bids[ad_id]
    scores = strategy.sweep_scores(instance, ad_id, bids)
    entered = _entered_from_scores(scores, ad_id, instance.subset_size)
    return PerturbationTest(instance.auction_id, ad_id, factors, tuple(entered))


@dataclass
class IcReport:
    strategy: str
    n_tests: int
    n_failures: int
    seed: int = 0
    failed: list = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        return self.n_failures / self.n_tests if self.n_tests else 0.0

    def csv_row(self) -> list:
        return [self.strategy, self.n_tests, self.n_failures, repr(self.failure_rate), self.seed]


IC_CSV_HEADER = ["strategy", "n_tests", "failures", "failure_rate", "seed"]


def write_ic_csv(reports: Sequence[IcReport], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(IC_CSV_HEADER)
        for r in reports:
            writer.writerow(r.csv_row())


def ic_failure_rate(strategy, instances: Sequence, ads_per_auction: Optional[int] = None,
                    factors: Sequence[float] = DEFAULT_FACTORS, seed: int = 0) -> IcReport:
    """Run one perturbation test per sampled (auction, ad) pair.

    ``ads_per_auction=None`` tests every ad; otherwise that many ads are drawn
    per auction without replacement from a stream seeded by ``seed``.
    """
    if not instances:
        raise ValueError("no auctions to test")
    rng = np.random.default_rng(seed)
    n_tests = n_fail = 0
    failed = []
    for inst in instances:
        if ads_per_auction is None or ads_per_auction >= inst.n_ads:
            ads = range(inst.n_ads)
        else:
            ads = np.sort(rng.choice(inst.n_ads, size=ads_per_auction, replace=False))
        for ad in ads:
            test = run_perturbation_test(strategy, inst, int(ad), factors)
            n_tests += 1
            if not test.passed:
                n_fail += 1
                failed.append(test)
    return IcReport(getattr(strategy, "name", str(strategy)), n_tests, n_fail, seed, failed)


def verify_gsp_conditions(outcome: AuctionOutcome, bids, ctrs, grid: Sequence[float] = (1.1, 1.5, 2.0, 4.0),
                          tol: float = 1e-9) -> bool:
    """IR, critical price and slot monotonicity of a GSP outcome."""
    from .auction import gsp_run

    b = np.asarray(bids, dtype=np.float64)
    c = np.asarray(ctrs, dtype=np.float64)
    if b.shape != c.shape or b.ndim != 1:
        raise ValueError("bids and ctrs must be aligned 1-D arrays")
    if len(outcome.winners) != len(outcome.payments_per_click):
        raise ValueError("outcome has mismatched winners and payments")
    if len(outcome.winners) > b.size or any(not 0 <= w < b.size for w in outcome.winners):
        raise ValueError("outcome does not belong to these bids")
    scores = b * c
    order = rank_by_score(scores)
    k = len(outcome.winners)
    for j, (ad, pay) in enumerate(zip(outcome.winners, outcome.payments_per_click)):
        if ad != order[j]:
            return False
        if pay < 0 or pay > b[ad] + tol:
            return False
        runner_up = scores[order[j + 1]] if j + 1 < b.size else 0.0
        if abs(pay * c[ad] - runner_up) > tol:
            return False
        for factor in grid:
            raised = gsp_run(np.where(np.arange(b.size) == ad, b * factor, b), c, k)
            slot = raised.slot_of(ad)
            if slot == 0 or slot > j + 1:
                return False
    return True
