"""Repeated train/evaluate runs over synthetic or logged auctions."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..auction import compute_metrics
from ..env import EnvConfig, generate_auctions
from ..learning.training import TrainConfig, make_sample, train_pas, train_regression
from ..strategies import LEARNED, STRATEGY_NAMES, build_strategy
from .logio import load_auction_log

log = logging.getLogger(__name__)

METRICS = ("swr", "recall", "revr")
CSV_HEADER = ["strategy", "k", "metric", "mean", "std", "improvement_pct"]


@dataclass
class ExperimentConfig:
    env: Optional[EnvConfig] = None
    dataset: Optional[str] = None
    strategies: tuple = ("gdy", "pas-learned", "reg", "regctr")
    n_auctions: int = 500
    n_repetitions: int = 1
    metrics_k: tuple = (5,)
    master_seed: int = 0
    split: tuple = (3, 1, 1)
    train: TrainConfig = field(default_factory=TrainConfig)
    pas_mc_samples: int = 2000
    n_workers: int = 1

    def __post_init__(self):
        if self.n_repetitions < 1:
            raise ValueError("n_repetitions must be >= 1")
        if (self.env is None) == (self.dataset is None):
            raise ValueError("give exactly one of env or dataset")
        for name in self.strategies:
            if name not in STRATEGY_NAMES:
                raise ValueError(f"unknown strategy {name!r}")
        if "gdy" not in self.strategies:
            self.strategies = ("gdy",) + tuple(self.strategies)
        if len(self.split) != 3 or min(self.split) < 0 or self.split[2] <= 0:
            raise ValueError("split needs three nonnegative weights with a positive test share")


@dataclass
class ExperimentResult:
    rows: list
    per_repetition: dict
    failures: list
    seconds: float = 0.0

    def row(self, strategy: str, k: int, metric: str) -> dict:
        for r in self.rows:
            if r["strategy"] == strategy and r["k"] == k and r["metric"] == metric:
                return r
        raise KeyError((strategy, k, metric))


def repetition_rng(master_seed: int, repetition: int) -> np.random.Generator:
    """Independent stream per repetition derived from (master_seed, repetition)."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(repetition)]))


def split_counts(n: int, weights) -> tuple:
    w = np.asarray(weights, dtype=float)
    n_train = int(round(n * w[0] / w.sum()))
    n_val = int(round(n * w[1] / w.sum()))
    return n_train, n_val, n - n_train - n_val


def prepare_split(config: ExperimentConfig, rep: int, logged=None) -> tuple:
    """(train, validation, test, training seed) for repetition ``rep``."""
    rng = repetition_rng(config.master_seed, rep)
    if config.dataset is None:
        auctions = generate_auctions(config.env, config.n_auctions, rng)
    else:
        if logged is None:
            logged = load_auction_log(config.dataset)
        auctions = [logged[i] for i in rng.permutation(len(logged))]
    if not auctions:
        raise ValueError("no auctions to split")
    missing = [a.auction_id for a in auctions if a.realized_ctrs is None]
    if missing:
        raise ValueError(f"auctions {missing[:5]} lack realized refined ctrs")
    n_train, n_val, _ = split_counts(len(auctions), config.split)
    train_seed = int(rng.integers(2**31))
    return (auctions[:n_train], auctions[n_train:n_train + n_val],
            auctions[n_train + n_val:], train_seed)


def _strategy_options(name: str, config: ExperimentConfig, seed: int) -> dict:
    if name == "pas-mc":
        return dict(n_samples=config.pas_mc_samples, seed=seed)
    return {}


def train_learned(name: str, train_set, val_set, config: TrainConfig):
    include_bid = name != "regctr"
    config = replace(config, k=train_set[0].n_slots, m=train_set[0].subset_size)
    train = [make_sample(a, include_bid) for a in train_set]
    val = [make_sample(a, include_bid) for a in val_set] or None
    if name == "pas-learned":
        return train_pas(train, config, val)
    target = "b_times_ctr" if name == "reg" else "ctr_only"
    return train_regression(train, target, config, val)


def _evaluate(strategy, auction, ks):
    sel = strategy.select(auction).selected
    return [compute_metrics(sel, auction, auction.realized_ctrs, k) for k in ks]


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Mean / std over repetitions and improvement over GDY per strategy, K, metric."""
    start = time.perf_counter()
    per_rep = {(s, k, m): [] for s in config.strategies for k in config.metrics_k for m in METRICS}
    failures = []
    logged = load_auction_log(config.dataset) if config.dataset else None

    for rep in range(config.n_repetitions):
        train_set, val_set, test_set, train_seed = prepare_split(config, rep, logged)

        for name in config.strategies:
            if name in LEARNED:
                params = train_learned(name, train_set, val_set, replace(config.train, seed=train_seed))
                strategy = build_strategy(name, params)
            else:
                strategy = build_strategy(name, **_strategy_options(name, config, train_seed))

            def work(auction, strategy=strategy):
                try:
                    return _evaluate(strategy, auction, config.metrics_k)
                except Exception as exc:  # noqa: BLE001 - recorded and reported
                    return exc

            if config.n_workers > 1:
                with ThreadPoolExecutor(config.n_workers) as pool:
                    results = list(pool.map(work, test_set))
            else:
                results = [work(a) for a in test_set]

            ok = []
            for auction, res in zip(test_set, results):
                if isinstance(res, Exception):
                    failures.append((rep, name, auction.auction_id, repr(res)))
                    log.warning("strategy %s failed on auction %s: %r", name, auction.auction_id, res)
                else:
                    ok.append(res)
            for ki, k in enumerate(config.metrics_k):
                for metric in METRICS:
                    vals = [getattr(r[ki], metric) for r in ok]
                    per_rep[(name, k, metric)].append(float(np.mean(vals)) if vals else float("nan"))

    rows = []
    for name in config.strategies:
        for k in config.metrics_k:
            for metric in METRICS:
                vals = np.array(per_rep[(name, k, metric)])
                base = float(np.mean(per_rep[("gdy", k, metric)]))
                mean = float(np.mean(vals))
                rows.append({
                    "strategy": name, "k": k, "metric": metric, "mean": mean,
                    "std": float(np.std(vals)),
                    "improvement_pct": 100.0 * (mean - base) / base if base else float("nan"),
                })
    return ExperimentResult(rows, per_rep, failures, time.perf_counter() - start)


def write_results_csv(result: ExperimentResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in result.rows:
            writer.writerow([r["strategy"], r["k"], r["metric"], repr(r["mean"]),
                             repr(r["std"]), repr(r["improvement_pct"])])


def format_table(result: ExperimentResult) -> str:
    lines = [f"{'strategy':<18} {'K':>3} {'metric':<7} {'mean':>8} {'std':>8} {'vs GDY':>9}"]
    for r in result.rows:
        lines.append(
            f"{r['strategy']:<18} {r['k']:>3} {r['metric']:<7} {r['mean']:>8.4f} "
            f"{r['std']:>8.4f} {r['improvement_pct']:>+8.2f}%"
        )
    if result.failures:
        lines.append(f"{len(result.failures)} (strategy, auction) evaluations failed and were excluded:")
        lines.extend(f"  rep {rep} {name} auction {aid}: {msg}" for rep, name, aid, msg in result.failures)
    return "\n".join(lines)
