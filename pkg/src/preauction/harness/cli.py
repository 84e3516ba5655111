"""Command line entry point: ``preauction <subcommand> [--seed N] [--config PATH] [--out PATH]``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..ic import ic_failure_rate, write_ic_csv
from ..learning.scorer import load_params, save_params
from ..strategies import LEARNED, build_strategy
from ..verification import run_oracle_suite
from .config import ConfigError, RunConfig, build_run_config, load_run_config
from .experiment import format_table, prepare_split, run_experiment, train_learned, write_results_csv
from .logio import save_auction_log

log = logging.getLogger(__name__)

SUBCOMMANDS = ("generate", "train", "evaluate", "ic-test", "oracle-check", "report")
DEFAULT_OUT = {
    "generate": "auctions.jsonl",
    "train": "model.bin",
    "evaluate": "results.csv",
    "ic-test": "ic.csv",
    "oracle-check": "oracle.csv",
    "report": "traces.csv",
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="preauction", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="subcommand")
    helps = {
        "generate": "write a synthetic auction log",
        "train": "fit a learned scorer (model_type) and write a model file",
        "evaluate": "run repeated experiments; write a CSV and a text table",
        "ic-test": "bid-perturbation IC tests; write a CSV",
        "oracle-check": "small-instance verification suite",
        "report": "per-auction score traces for rank plots (CSV)",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        p.add_argument("--config", type=Path, default=None, help="flat key = value config file")
        p.add_argument("--out", type=Path, default=Path(DEFAULT_OUT[name]), help="output path")
        if name in ("ic-test", "report", "evaluate"):
            p.add_argument("--model", type=Path, action="append", default=[],
                           help="pre-trained model file(s) to use instead of training")
    return parser


def _load_models(paths) -> dict:
    models = {}
    for path in paths:
        params = load_params(path)
        models[params.metadata.get("strategy", "pas-learned")] = params
    return models


def _strategies(names, cfg: RunConfig, train_set, val_set, seed, models) -> list:
    out = []
    for name in names:
        if name in LEARNED:
            params = models.get(name)
            if params is None:
                params = train_learned(name, train_set, val_set, replace(cfg.experiment.train, seed=seed))
            out.append(build_strategy(name, params))
        elif name == "pas-mc":
            out.append(build_strategy(name, n_samples=cfg.experiment.pas_mc_samples, seed=seed))
        else:
            out.append(build_strategy(name))
    return out


def cmd_generate(cfg: RunConfig, args) -> int:
    exp = cfg.experiment
    if exp.env is None:
        raise ConfigError("generate needs a synthetic environment, not a dataset")
    from ..env import generate_auctions
    from .experiment import repetition_rng

    auctions = generate_auctions(exp.env, exp.n_auctions, repetition_rng(exp.master_seed, 0))
    save_auction_log(auctions, args.out)
    print(f"wrote {len(auctions)} auctions to {args.out}")
    return 0


def cmd_train(cfg: RunConfig, args) -> int:
    if cfg.model_type not in LEARNED:
        raise ConfigError(f"model_type must be one of {sorted(LEARNED)}, got {cfg.model_type!r}")
    train_set, val_set, _, seed = prepare_split(cfg.experiment, 0)
    params = train_learned(cfg.model_type, train_set, val_set, replace(cfg.experiment.train, seed=seed))
    params.metadata["strategy"] = cfg.model_type
    params.metadata["master_seed"] = cfg.experiment.master_seed
    save_params(params, args.out)
    print(f"wrote {cfg.model_type} model ({params.weights.size} weights) to {args.out}")
    return 0


def cmd_evaluate(cfg: RunConfig, args) -> int:
    if args.model:
        raise ConfigError("evaluate trains per repetition; --model is only for ic-test and report")
    result = run_experiment(cfg.experiment)
    write_results_csv(result, args.out)
    table = format_table(result)
    args.out.with_suffix(".txt").write_text(table + "\n")
    print(table)
    return 0


def cmd_ic_test(cfg: RunConfig, args) -> int:
    train_set, val_set, test_set, seed = prepare_split(cfg.experiment, 0)
    strategies = _strategies(cfg.ic_strategies, cfg, train_set, val_set, seed, _load_models(args.model))
    reports = [ic_failure_rate(s, test_set, cfg.ads_per_auction, cfg.ic_factors, seed=cfg.experiment.master_seed)
               for s in strategies]
    write_ic_csv(reports, args.out)
    for r in reports:
        print(f"{r.strategy:<18} {r.n_failures:>6} / {r.n_tests:<7} failure rate {r.failure_rate:.5f}")
    return 0


def cmd_oracle_check(cfg: RunConfig, args) -> int:
    results = run_oracle_suite(cfg.experiment.master_seed)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["check", "passed", "detail"])
        for r in results:
            writer.writerow([r.name, r.passed, r.detail])
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def cmd_report(cfg: RunConfig, args) -> int:
    """Rows per (auction, strategy, ad): score, rank by score, rank by refined value, selected flag."""
    train_set, val_set, test_set, seed = prepare_split(cfg.experiment, 0)
    strategies = _strategies(cfg.experiment.strategies, cfg, train_set, val_set, seed, _load_models(args.model))
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["auction_id", "strategy", "ad_id", "score", "score_rank", "refined_value",
                         "refined_rank", "selected"])
        for auction in test_set[:cfg.report_auctions]:
            refined = auction.bids * auction.realized_ctrs
            refined_rank = np.empty(auction.n_ads, dtype=int)
            refined_rank[np.argsort(-refined, kind="stable")] = np.arange(1, auction.n_ads + 1)
            for strat in strategies:
                scores = strat.scores(auction)
                chosen = set(strat.select(auction).selected)
                rank = np.empty(auction.n_ads, dtype=int)
                rank[np.argsort(-scores, kind="stable")] = np.arange(1, auction.n_ads + 1)
                for i, ad in enumerate(auction.ads):
                    writer.writerow([auction.auction_id, strat.name, ad.ad_id, repr(float(scores[i])),
                                     rank[i], repr(float(refined[i])), refined_rank[i], int(i in chosen)])
    print(f"wrote score traces for {min(cfg.report_auctions, len(test_set))} auctions to {args.out}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ic-test": cmd_ic_test,
    "oracle-check": cmd_oracle_check,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed usage
        return int(exc.code) if exc.code else 0
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_run_config(args.config) if args.config is not None else build_run_config()
        cfg = cfg.with_seed(args.seed)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"preauction {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
