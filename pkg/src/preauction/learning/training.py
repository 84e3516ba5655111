"""Feature construction and training of the learned PAS / REG / REGCTR scorers."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..auction import AuctionInstance
from .plackett_luce import listwise_loss, listwise_loss_grad, mse_loss, mse_loss_grad
from .scorer import ScorerParams, backward, forward, init_params, make_architecture

log = logging.getLogger(__name__)

LABEL_FLOOR = 1e-9
BID_COLUMNS = (0, 2)


class TrainingDiverged(RuntimeError):
    pass


def feature_matrix(bids, partial, user_features, include_bid: bool = True) -> np.ndarray:
    """Scorer input per ad.

    Columns: log bid, log coarse ctr, log(bid * coarse ctr), the remaining
    partial features, then the user features broadcast to every ad. Without
    the bid the two bid-derived columns are dropped. ``bids`` may carry
    leading batch dimensions, e.g. (F, N) for a sweep over one ad's bid.
    """
    bids = np.asarray(bids, dtype=np.float64)
    partial = np.asarray(partial, dtype=np.float64)
    user = np.asarray(user_features, dtype=np.float64)
    lead = bids.shape[:-1]
    n = bids.shape[-1]
    log_coarse = np.log(np.maximum(partial[:, 0], 1e-12))
    rest = partial[:, 1:]
    cols = []
    if include_bid:
        log_bid = np.log(np.maximum(bids, 1e-12))
        cols += [log_bid[..., None], np.broadcast_to(log_coarse[:, None], lead + (n, 1)),
                 (log_bid + log_coarse)[..., None]]
    else:
        cols.append(np.broadcast_to(log_coarse[:, None], lead + (n, 1)))
    cols.append(np.broadcast_to(rest, lead + rest.shape))
    cols.append(np.broadcast_to(user, lead + (n, user.size)))
    return np.concatenate(cols, axis=-1)


def instance_features(instance: AuctionInstance, include_bid: bool = True) -> np.ndarray:
    return feature_matrix(instance.bids, instance.partial_matrix, instance.user_features, include_bid)


@dataclass(frozen=True)
class TrainingSample:
    features: np.ndarray
    labels: np.ndarray
    bids: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        b = np.asarray(self.bids, dtype=np.float64)
        if f.ndim != 2 or f.shape[0] != y.size or b.shape != y.shape:
            raise ValueError("features rows, labels and bids must align")
        if np.any(~(y > 0)):
            raise ValueError("labels must be strictly positive")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "bids", b)


def make_sample(instance: AuctionInstance, include_bid: bool = True) -> TrainingSample:
    """Sample labelled with y_i = b_i * realized refined ctr (floored at 1e-9)."""
    if instance.realized_ctrs is None:
        raise ValueError("instance has no realized refined ctrs to label with")
    y = np.maximum(instance.bids * instance.realized_ctrs, LABEL_FLOOR)
    return TrainingSample(instance_features(instance, include_bid), y, instance.bids)


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    n_epochs: int = 20
    batch_size: int = 32
    seed: int = 0
    weight_init_scale: float = 1.0
    momentum: float = 0.9
    early_stop_metric: str = "swr"
    patience: int = 5
    k: int = 5
    m: int = 10
    encoder_widths: tuple = (32, 32)
    head_widths: tuple = (32,)
    aggregations: tuple = ("mean", "max")
    activation: str = "tanh"
    regression_pointwise: bool = True

    def __post_init__(self):
        if self.learning_rate < 0 or self.n_epochs < 1 or self.batch_size < 1:
            raise ValueError("learning_rate must be >= 0, n_epochs and batch_size positive")
        if self.early_stop_metric not in ("swr", "none"):
            raise ValueError("early_stop_metric must be 'swr' or 'none'")


def _stack(dataset: Sequence[TrainingSample], idx) -> tuple:
    x = np.stack([dataset[i].features for i in idx])
    y = np.stack([dataset[i].labels for i in idx])
    b = np.stack([dataset[i].bids for i in idx])
    return x, y, b


def model_scores(params: ScorerParams, features, bids) -> np.ndarray:
    """Selection scores: logits, direct regression output, or bid times output."""
    out = forward(params, features)
    mode = params.architecture["score_mode"]
    if mode == "bid_times":
        return np.asarray(bids) * out
    return out


def validation_swr(params: ScorerParams, dataset: Sequence[TrainingSample], k: int, m: int) -> float:
    """Mean SWr@k when each sample's top-m by model score enters the auction."""
    total = 0.0
    for s in dataset:
        scores = model_scores(params, s.features, s.bids)
        sel = np.argsort(-scores, kind="stable")[:m]
        best = np.sort(s.labels)[::-1][:k].sum()
        got = np.sort(s.labels[sel])[::-1][:k].sum()
        total += got / best
    return total / len(dataset)


def _fit_normalizer(arch: dict, dataset: Sequence[TrainingSample]) -> None:
    allx = np.concatenate([s.features for s in dataset], axis=0)
    scale = allx.std(axis=0)
    arch["input_shift"] = allx.mean(axis=0).tolist()
    arch["input_scale"] = np.where(scale > 1e-12, scale, 1.0).tolist()


def _check_dataset(dataset):
    if not dataset:
        raise ValueError("training set is empty")
    d = dataset[0].features.shape[1]
    n = dataset[0].features.shape[0]
    for s in dataset:
        if s.features.shape != (n, d):
            raise ValueError("all samples must share the same (N, d) shape")
    return d


def _train(dataset, config, arch, loss_fn, grad_fn, target_fn, validation):
    rng = np.random.default_rng(config.seed)
    params = init_params(arch, rng, config.weight_init_scale)
    x_all, y_all, b_all = _stack(dataset, range(len(dataset)))
    t_all = target_fn(y_all, b_all)

    def full_loss(p):
        return loss_fn(forward(p, x_all), t_all)

    history = [full_loss(params)]
    velocity = np.zeros_like(params.weights)
    best = params.copy()
    best_metric = -np.inf
    stale = 0
    n = len(dataset)
    for epoch in range(config.n_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            out, cache = forward(params, x_all[idx], return_cache=True)
            g = backward(params, cache, grad_fn(out, t_all[idx]))
            velocity = config.momentum * velocity - config.learning_rate * g
            params.weights += velocity
        loss = full_loss(params)
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"loss became {loss} in epoch {epoch + 1}; lower learning_rate (now {config.learning_rate})"
            )
        history.append(loss)
        if validation and config.early_stop_metric == "swr":
            metric = validation_swr(params, validation, config.k, config.m)
            log.debug("epoch %d loss %.6g val swr %.5f", epoch + 1, loss, metric)
            if metric > best_metric:
                best_metric, best, stale = metric, params.copy(), 0
            else:
                stale += 1
                if stale >= config.patience:
                    break
        else:
            best = params
    best.metadata["loss_history"] = [float(v) for v in history]
    if np.isfinite(best_metric):
        best.metadata["best_val_swr"] = float(best_metric)
    return best


def _architecture(d: int, config: TrainConfig, pointwise: bool = False, **kw) -> dict:
    aggregations = () if pointwise else config.aggregations
    return make_architecture(d, config.encoder_widths, config.head_widths,
                             aggregations, config.activation, **kw)


def train_pas(dataset: Sequence[TrainingSample], config: TrainConfig,
              validation: Optional[Sequence[TrainingSample]] = None) -> ScorerParams:
    """Fit the set scorer with the listwise top-1 cross-entropy loss."""
    d = _check_dataset(dataset)
    arch = _architecture(d, config, output="identity", score_mode="logit", include_bid=True)
    _fit_normalizer(arch, dataset)
    return _train(dataset, config, arch, listwise_loss, listwise_loss_grad,
                  lambda y, b: y, validation)


def train_regression(dataset: Sequence[TrainingSample], target: str, config: TrainConfig,
                     validation: Optional[Sequence[TrainingSample]] = None) -> ScorerParams:
    """MSE regression baseline.

    ``target="b_times_ctr"`` (REG) regresses y and scores by the output;
    ``target="ctr_only"`` (REGCTR) regresses y / b from bid-free features and
    scores by bid times the output. Targets are divided by their training
    mean, which rescales scores without changing any ranking. With
    ``config.regression_pointwise`` (the default) each ad is scored from its
    own features only, with no set context.
    """
    if target not in ("b_times_ctr", "ctr_only"):
        raise ValueError(f"unknown regression target {target!r}")
    d = _check_dataset(dataset)
    include_bid = target == "b_times_ctr"
    arch = _architecture(d, config, config.regression_pointwise, output="softplus",
                         score_mode="direct" if include_bid else "bid_times",
                         include_bid=include_bid)
    _fit_normalizer(arch, dataset)

    def raw_target(y, b):
        return y if include_bid else y / b

    scale = float(np.mean(np.concatenate([raw_target(s.labels, s.bids) for s in dataset])))
    arch["target_scale"] = scale
    return _train(dataset, config, arch, mse_loss, mse_loss_grad,
                  lambda y, b: raw_target(y, b) / scale, validation)
