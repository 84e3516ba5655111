"""Stochastic CTR environment and synthetic instance generators.

The refined CTR of an ad is a discrete random variable seen from the
pre-auction stage; the coarse estimator reports (an estimate of) its mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .auction import AdRecord, AuctionInstance

MAX_JOINT_ROWS_L = 20


@dataclass(frozen=True)
class CtrDistribution:
    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.values, dtype=np.float64))
        p = np.atleast_1d(np.asarray(self.probs, dtype=np.float64))
        if v.ndim != 1 or v.shape != p.shape or v.size == 0:
            raise ValueError("support values and probabilities must be non-empty and aligned")
        if np.any((v < 0) | (v > 1)) or not np.all(np.isfinite(v)):
            raise ValueError("support values must lie in [0, 1]")
        if np.any((p < 0) | (p > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        if np.unique(v).size != v.size:
            raise ValueError("support values must be distinct")
        v.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    @classmethod
    def point(cls, value: float) -> "CtrDistribution":
        return cls(np.array([value]), np.array([1.0]))

    @classmethod
    def from_points(cls, values, probs) -> "CtrDistribution":
        """Build from possibly repeated values, merging equal atoms."""
        values = np.asarray(values, dtype=np.float64)
        probs = np.asarray(probs, dtype=np.float64)
        uniq, inverse = np.unique(values, return_inverse=True)
        merged = np.zeros(uniq.size)
        np.add.at(merged, inverse, probs)
        return cls(uniq, merged / merged.sum())

    @property
    def support(self) -> list:
        return list(zip(self.values.tolist(), self.probs.tolist()))

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))


def coarse_ctr(dist: CtrDistribution) -> float:
    """Coarse CTR as the conditional mean of the refined CTR."""
    return dist.mean


def calibrate_downsampled(p, eta):
    """Undo negative down-sampling at rate ``eta``: p / (p + (1 - p) / eta)."""
    p_arr = np.asarray(p, dtype=np.float64)
    eta_arr = np.asarray(eta, dtype=np.float64)
    if np.any((p_arr <= 0) | (p_arr >= 1)):
        raise ValueError("p must lie in the open interval (0, 1)")
    if np.any((eta_arr <= 0) | (eta_arr > 1)):
        raise ValueError("eta must lie in (0, 1]")
    out = p_arr / (p_arr + (1.0 - p_arr) / eta_arr)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class JointTable:
    """Explicit joint distribution over refined CTR vectors (rows)."""

    ctrs: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.ctrs, dtype=np.float64)
        p = np.asarray(self.probs, dtype=np.float64)
        if c.ndim != 2 or p.shape != (c.shape[0],):
            raise ValueError("joint table needs an (R, N) ctr matrix and R probabilities")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"joint probabilities sum to {p.sum()!r}, not 1")
        object.__setattr__(self, "ctrs", c)
        object.__setattr__(self, "probs", p)


@dataclass(frozen=True)
class SimpaInstance:
    """Inputs of the stochastic subset-selection problem.

    Either ``dists`` (independent per-ad distributions) or ``joint`` (an
    explicit correlated table) describes the refined CTRs.
    """

    bids: np.ndarray
    dists: tuple = ()
    m: int = 1
    k: int = 1
    joint: Optional[JointTable] = None

    def __post_init__(self):
        b = np.asarray(self.bids, dtype=np.float64)
        object.__setattr__(self, "bids", b)
        object.__setattr__(self, "dists", tuple(self.dists))
        if np.any(b < 0):
            raise ValueError("bids must be nonnegative")
        if self.k < 1 or self.m < 0:
            raise ValueError("need k >= 1 and m >= 0")
        if self.joint is None:
            if len(self.dists) != b.size:
                raise ValueError("one distribution per ad is required")
        elif self.joint.ctrs.shape[1] != b.size:
            raise ValueError("joint table width must equal the number of ads")

    @property
    def is_joint(self) -> bool:
        return self.joint is not None

    @property
    def n_ads(self) -> int:
        return self.bids.size

    @property
    def coarse_scores(self) -> np.ndarray:
        if self.is_joint:
            return self.bids * (self.joint.probs @ self.joint.ctrs)
        return self.bids * np.array([d.mean for d in self.dists])

    def n_outcomes(self, subset=None) -> int:
        if self.is_joint:
            return self.joint.probs.size
        idx = range(self.n_ads) if subset is None else subset
        total = 1
        for i in idx:
            total *= self.dists[i].size
        return total

    def with_bid(self, index: int, bid: float) -> "SimpaInstance":
        b = self.bids.copy()
        b[index] = bid
        return replace(self, bids=b)


def sample_realization(dists: Sequence[CtrDistribution], rng: np.random.Generator) -> np.ndarray:
    """One independent refined-CTR draw per ad."""
    if isinstance(dists, SimpaInstance):
        if dists.is_joint:
            raise ValueError("joint-table instances must be sampled with sample_joint")
        dists = dists.dists
    u = rng.random(len(dists))
    out = np.empty(len(dists))
    for i, (d, ui) in enumerate(zip(dists, u)):
        j = min(int(np.searchsorted(np.cumsum(d.probs), ui, side="right")), d.size - 1)
        out[i] = d.values[j]
    return out


def sample_realizations(dists: Sequence[CtrDistribution], n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws per ad as an (n, N) matrix."""
    u = rng.random((n, len(dists)))
    out = np.empty((n, len(dists)))
    for i, d in enumerate(dists):
        j = np.minimum(np.searchsorted(np.cumsum(d.probs), u[:, i], side="right"), d.size - 1)
        out[:, i] = d.values[j]
    return out


def sample_joint(instance: SimpaInstance, n: int, rng: np.random.Generator) -> np.ndarray:
    if not instance.is_joint:
        raise ValueError("instance has no joint table")
    rows = rng.choice(instance.joint.probs.size, size=n, p=instance.joint.probs)
    return instance.joint.ctrs[rows]


@dataclass(frozen=True)
class EnvConfig:
    """Knobs of the synthetic auction generator.

    Each ad gets a latent base logit and a visible uncertainty level ``u``.
    Its refined CTR is ``calibrate(sigmoid(logit + gap_factor * u * z))``
    with ``z`` on Gauss-Hermite nodes, so the support spread grows with
    ``gap_factor``. ``coarse_mode`` picks what the coarse estimator reports:
    ``"mean"`` is the exact mean of that distribution, ``"calibrated"`` is
    the calibration applied after averaging in the down-sampled space (how a
    coarse model trained on down-sampled data behaves).

    Heterogeneity knobs (all off by default): ``bid_scale_std`` scales every
    bid of an auction by a common lognormal factor; ``context_logit_std``
    shifts every refined logit of an auction by a common normal draw; a hidden
    intent vector pulls the aux features of retrieved ads toward itself
    (``intent_retrieval_bias``) and adds ``intent_strength * <aux_i, intent>``
    to the refined logit. In ``calibrated`` mode the coarse estimate sees none
    of the logit shifts; ``mean`` mode reports the true mean, shifts included.
    """

    n_ads: int = 100
    subset_size: int = 10
    n_slots: int = 5
    support_size: int = 3
    bid_range: tuple = (0.1, 1.0)
    gap_factor: float = 1.0
    seed: int = 0
    eta: Optional[float] = None
    coarse_mode: str = "mean"
    logit_mean: float = -1.0
    logit_std: float = 1.0
    n_user_features: int = 2
    n_aux_features: int = 1
    bid_scale_std: float = 0.0
    context_logit_std: float = 0.0
    intent_strength: float = 0.0
    intent_retrieval_bias: float = 0.0

    def __post_init__(self):
        if not (1 <= self.n_slots <= self.subset_size <= self.n_ads):
            raise ValueError("need 1 <= K <= M <= N")
        if self.bid_range[0] < 0 or self.bid_range[1] < self.bid_range[0]:
            raise ValueError("bid_range must satisfy 0 <= low <= high")
        if self.support_size < 1:
            raise ValueError("support_size must be >= 1")
        if self.gap_factor < 0:
            raise ValueError("gap_factor must be nonnegative")
        if self.coarse_mode not in ("mean", "calibrated"):
            raise ValueError(f"unknown coarse_mode {self.coarse_mode!r}")
        for name in ("bid_scale_std", "context_logit_std", "intent_strength", "intent_retrieval_bias"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.eta is not None and not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")


# public presets add cross-auction heterogeneity and a hidden user intent
_HETEROGENEITY = dict(n_aux_features=2, bid_scale_std=0.5, context_logit_std=1.0,
                      intent_strength=0.3, intent_retrieval_bias=0.6)

PRESETS = {
    "public1-like": dict(eta=0.01, gap_factor=1.2, coarse_mode="calibrated", **_HETEROGENEITY),
    "public5-like": dict(eta=0.05, gap_factor=0.8, coarse_mode="calibrated", **_HETEROGENEITY),
    "tiny": dict(n_ads=6, subset_size=3, n_slots=2, support_size=2, gap_factor=1.5),
}


def preset(name: str, **overrides) -> EnvConfig:
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None
    base.update(overrides)
    return EnvConfig(**base)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def generate_auction(config: EnvConfig, rng: Optional[np.random.Generator] = None,
                     auction_id: int = 0) -> AuctionInstance:
    """Draw one synthetic auction, including a realized refined CTR per ad.

    Partial features per ad: ``(coarse_ctr, uncertainty, aux...)``.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    n = config.n_ads
    user = rng.normal(size=config.n_user_features)
    # user context shifts every ad's base logit by a common amount
    shift = 0.3 * user.sum() / max(1, np.sqrt(config.n_user_features)) if user.size else 0.0
    base = rng.normal(config.logit_mean, config.logit_std, size=n) + shift
    uncertainty = rng.uniform(0.0, 1.0, size=n)
    # hidden user intent: retrieval pulls candidates toward it, and only the
    # refined model scores the match, so it is visible only through the set
    intent = rng.normal(size=config.n_aux_features)
    aux = rng.normal(size=(n, config.n_aux_features)) + config.intent_retrieval_bias * intent
    lo, hi = config.bid_range
    bids = rng.uniform(lo, hi, size=n)
    # per-auction value level of the query, and a context effect only the refined model sees
    bids = bids * np.exp(config.bid_scale_std * rng.normal())
    hidden = config.context_logit_std * rng.normal() + config.intent_strength * (aux @ intent)

    nodes, weights = np.polynomial.hermite_e.hermegauss(config.support_size)
    weights = weights / weights.sum()
    logits = base[:, None] + config.gap_factor * uncertainty[:, None] * nodes[None, :]
    p = _sigmoid(logits)
    eta = 1.0 if config.eta is None else config.eta
    support = calibrate_downsampled(np.clip(_sigmoid(logits + np.reshape(hidden, (-1, 1))), 1e-12, 1 - 1e-12), eta)

    dists = []
    coarse = np.empty(n)
    for i in range(n):
        d = CtrDistribution.from_points(support[i], weights)
        dists.append(d)
        if config.coarse_mode == "mean":
            coarse[i] = d.mean
        else:
            coarse[i] = calibrate_downsampled(np.clip(p[i] @ weights, 1e-12, 1 - 1e-12), eta)

    realized = sample_realization(dists, rng)
    ads = [
        AdRecord(i, float(bids[i]), np.concatenate(([coarse[i], uncertainty[i]], aux[i])), i)
        for i in range(n)
    ]
    return AuctionInstance(ads, user, config.n_slots, config.subset_size,
                           tuple(dists), realized, auction_id)


def generate_auctions(config: EnvConfig, n_auctions: int,
                      rng: Optional[np.random.Generator] = None) -> list:
    if rng is None:
        rng = np.random.default_rng(config.seed)
    return [generate_auction(config, rng, auction_id=a) for a in range(n_auctions)]


def generate_example1(n: int, m: int, k: int, t: float,
                      det_values: Optional[Sequence[float]] = None,
                      j_score: Optional[float] = None,
                      eps: float = 0.0) -> SimpaInstance:
    """Adversarial instance on which ranking by expected score is suboptimal.

    Ads ``0..m-1`` (and any ads after ``m``) are deterministic with
    descending scores. Ad ``m`` has expected-score scale ``j_score`` below the
    m-th deterministic score but realizes ``t * j_score`` with probability
    ``1/t`` (``eps`` otherwise).
    """
    if not (1 <= k <= m < n):
        raise ValueError("need 1 <= k <= m < n")
    if t <= 1:
        raise ValueError("t must exceed 1")
    if det_values is None:
        det_values = np.linspace(1.0, 0.9, m)
    det_values = np.asarray(det_values, dtype=np.float64)
    if det_values.size != m or np.any(np.diff(det_values) > 0):
        raise ValueError("det_values must be m non-increasing scores")
    if j_score is None:
        j_score = 0.99 * det_values[-1]
    if j_score * t <= det_values[k - 1]:
        raise ValueError("t too small: the high realization must beat the k-th deterministic score")
    if j_score >= det_values[-1]:
        raise ValueError("ad j must have a lower expected score than ad m")
    if not 0 <= eps < j_score * t:
        raise ValueError("eps must be nonnegative and below the high realization")
    if j_score + (1.0 - 1.0 / t) * eps >= det_values[-1]:
        raise ValueError("eps pushes the expected score of ad j above ad m")

    tail = j_score * 0.5 ** np.arange(1, n - m)

    bids, dists = [], []
    for v in det_values:
        bids.append(2.0 * v)
        dists.append(CtrDistribution.point(0.5))
    hi = t * j_score
    bid_j = 2.0 * hi
    dists.append(CtrDistribution.from_points([0.5, eps / bid_j], [1.0 / t, 1.0 - 1.0 / t]))
    bids.append(bid_j)
    for v in tail:
        bids.append(2.0 * v)
        dists.append(CtrDistribution.point(0.5))
    return SimpaInstance(np.array(bids), tuple(dists), m=m, k=k)


def set_cover_to_simpa(universe_size: int, subsets: Sequence[Sequence[int]], m: int) -> SimpaInstance:
    """SimPA instance with K=1 whose optimum is 1 iff a size-``m`` cover exists.

    A nonempty U' is drawn uniformly; ad i scores 1 when its set meets U'.
    Elements are 0-based: each subset is drawn from ``range(universe_size)``.
    """
    if universe_size < 1:
        raise ValueError("universe must be nonempty")
    if universe_size > MAX_JOINT_ROWS_L:
        raise ValueError(f"universe_size {universe_size} > {MAX_JOINT_ROWS_L}: joint table too large")
    masks = []
    for s in subsets:
        s = set(int(e) for e in s)
        if not s or min(s) < 0 or max(s) >= universe_size:
            raise ValueError(f"subset {sorted(s)} must be nonempty and inside the universe")
        masks.append(sum(1 << e for e in s))
    rows = np.arange(1, 1 << universe_size)
    hits = np.array([[(r & mk) != 0 for mk in masks] for r in rows], dtype=np.float64)
    probs = np.full(rows.size, 1.0 / rows.size)
    return SimpaInstance(
        bids=np.ones(len(masks)), m=m, k=1, joint=JointTable(hits.reshape(rows.size, len(masks)), probs)
    )
