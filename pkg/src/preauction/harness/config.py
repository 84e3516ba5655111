"""Flat ``key = value`` configuration files.

Blank lines and lines starting with ``#`` or ``;`` are ignored. Lists are
comma separated. Recognised keys (defaults in brackets):

environment
    preset [tiny], n_ads, subset_size, n_slots, support_size, bid_low,
    bid_high, gap_factor, eta (``none`` disables calibration), coarse_mode,
    logit_mean, logit_std, n_user_features, n_aux_features, bid_scale_std,
    context_logit_std, intent_strength, intent_retrieval_bias
    dataset: path to an auction log, used instead of the generator
experiment
    strategies [gdy,pas-exact,pas-learned,reg,regctr,oracle], n_auctions [500],
    n_repetitions [1], metrics_k [2 for tiny, else 5], master_seed [0],
    split [3,1,1], pas_mc_samples [2000], n_workers [1]
training
    learning_rate, n_epochs, batch_size, weight_init_scale, momentum,
    early_stop_metric, patience, encoder_widths, head_widths, aggregations,
    activation, regression_pointwise
cli
    model_type [pas-learned] (train), ic_strategies [gdy,regctr,pas-learned],
    ads_per_auction [all], ic_factors [0.2,...,2.0], report_auctions [3]
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from typing import Optional

from ..env import EnvConfig, preset
from ..ic import DEFAULT_FACTORS
from ..learning.training import TrainConfig
from .experiment import ExperimentConfig


def _ints(v):
    return tuple(int(x) for x in v.split(",") if x.strip())


def _floats(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _names(v):
    return tuple(x.strip() for x in v.split(",") if x.strip())


def _opt_float(v):
    return None if v.strip().lower() == "none" else float(v)


def _opt_int(v):
    return None if v.strip().lower() in ("none", "all") else int(v)


def _bool(v):
    v = v.strip().lower()
    if v not in ("true", "false", "1", "0", "yes", "no"):
        raise ValueError(f"expected a boolean, got {v!r}")
    return v in ("true", "1", "yes")


ENV_KEYS = {
    "n_ads": int, "subset_size": int, "n_slots": int, "support_size": int,
    "bid_low": float, "bid_high": float, "gap_factor": float, "eta": _opt_float,
    "coarse_mode": str, "logit_mean": float, "logit_std": float,
    "n_user_features": int, "n_aux_features": int, "bid_scale_std": float,
    "context_logit_std": float, "intent_strength": float, "intent_retrieval_bias": float,
}
EXPERIMENT_KEYS = {
    "strategies": _names, "n_auctions": int, "n_repetitions": int, "metrics_k": _ints,
    "master_seed": int, "split": _floats, "pas_mc_samples": int, "n_workers": int,
}
TRAIN_KEYS = {
    "learning_rate": float, "n_epochs": int, "batch_size": int, "weight_init_scale": float,
    "momentum": float, "early_stop_metric": str, "patience": int,
    "encoder_widths": _ints, "head_widths": _ints, "aggregations": _names, "activation": str,
    "regression_pointwise": _bool,
}
CLI_KEYS = {
    "model_type": str, "ic_strategies": _names, "ads_per_auction": _opt_int,
    "ic_factors": _floats, "report_auctions": int,
}
OTHER_KEYS = {"preset": str, "dataset": str}
ALL_KEYS = {**ENV_KEYS, **EXPERIMENT_KEYS, **TRAIN_KEYS, **CLI_KEYS, **OTHER_KEYS}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """An ExperimentConfig plus the settings only individual subcommands use."""

    experiment: ExperimentConfig
    model_type: str = "pas-learned"
    ic_strategies: tuple = ("gdy", "regctr", "pas-learned")
    ads_per_auction: Optional[int] = None
    ic_factors: tuple = DEFAULT_FACTORS
    report_auctions: int = 3

    def with_seed(self, seed: Optional[int]) -> "RunConfig":
        if seed is None:
            return self
        return replace(self, experiment=replace(self.experiment, master_seed=int(seed)))


def read_config_file(path) -> dict:
    """Raw string values keyed by name; raises ConfigError naming ``path``."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                       comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    try:
        parser.read_string("[config]\n" + text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return dict(parser["config"])


def build_run_config(values: Optional[dict] = None) -> RunConfig:
    values = dict(values or {})
    unknown = sorted(set(values) - set(ALL_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        parsed = {k: ALL_KEYS[k](v) if isinstance(v, str) else v for k, v in values.items()}
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc

    try:
        env = None
        if "dataset" not in parsed:
            env_kw = {k: parsed[k] for k in ENV_KEYS if k in parsed and k not in ("bid_low", "bid_high")}
            if "bid_low" in parsed or "bid_high" in parsed:
                lo, hi = EnvConfig().bid_range
                env_kw["bid_range"] = (parsed.get("bid_low", lo), parsed.get("bid_high", hi))
            env = preset(parsed.get("preset", "tiny"), **env_kw)
        train_kw = {k: parsed[k] for k in TRAIN_KEYS if k in parsed}
        default_k = env.n_slots if env is not None else 5
        train = TrainConfig(**train_kw)
        exp_kw = {k: parsed[k] for k in EXPERIMENT_KEYS if k in parsed}
        exp_kw.setdefault("strategies", ("gdy", "pas-exact", "pas-learned", "reg", "regctr", "oracle"))
        exp_kw.setdefault("metrics_k", (default_k,))
        if env is not None:
            train = replace(train, k=env.n_slots, m=env.subset_size)
        experiment = ExperimentConfig(env=env, dataset=parsed.get("dataset"), train=train, **exp_kw)
        cli_kw = {k: parsed[k] for k in CLI_KEYS if k in parsed}
        return RunConfig(experiment, **cli_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_run_config(path) -> RunConfig:
    return build_run_config(read_config_file(path))


def documented_keys() -> list:
    return sorted(ALL_KEYS)

