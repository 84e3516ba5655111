import numpy as np
import pytest

from preauction import generate_auctions, preset
from preauction.learning import (
    TrainConfig,
    TrainingDiverged,
    TrainingSample,
    feature_matrix,
    forward,
    init_params,
    instance_features,
    make_sample,
    model_scores,
    train_pas,
    train_regression,
    validation_swr,
)
from preauction.learning.training import LABEL_FLOOR

SMALL = dict(encoder_widths=(8,), head_widths=(8,), k=2, m=3)


@pytest.fixture(scope="module")
def auctions():
    return generate_auctions(preset("tiny"), 60, np.random.default_rng(0))


@pytest.fixture(scope="module")
def samples(auctions):
    return [make_sample(a) for a in auctions]


def test_feature_columns():
    bids = np.array([1.0, 2.0])
    partial = np.array([[0.1, 0.5, 3.0], [0.2, 0.4, 4.0]])
    x = feature_matrix(bids, partial, [7.0])
    assert x.shape == (2, 6)
    assert np.allclose(x[:, 0], np.log(bids))
    assert np.allclose(x[:, 2], np.log(bids * partial[:, 0]))
    assert np.all(x[:, -1] == 7.0)
    nobid = feature_matrix(bids, partial, [7.0], include_bid=False)
    assert nobid.shape == (2, 4)
    assert np.allclose(nobid[:, 0], np.log(partial[:, 0]))


def test_feature_sweep_batch_matches_rows():
    partial = np.array([[0.1, 0.5], [0.2, 0.4], [0.3, 0.1]])
    sweep = np.array([[1.0, 2.0, 3.0], [1.5, 2.0, 3.0]])
    batched = feature_matrix(sweep, partial, [0.0])
    for row in range(2):
        assert np.array_equal(batched[row], feature_matrix(sweep[row], partial, [0.0]))


def test_labels_are_bid_times_realized_ctr(auctions):
    a = auctions[0]
    s = make_sample(a)
    assert np.allclose(s.labels, np.maximum(a.bids * a.realized_ctrs, LABEL_FLOOR))
    assert np.all(s.labels > 0)


def test_sample_validation():
    with pytest.raises(ValueError):
        TrainingSample(np.zeros((2, 3)), np.array([1.0, 0.0]), np.ones(2))
    with pytest.raises(ValueError):
        TrainingSample(np.zeros((3, 3)), np.ones(2), np.ones(2))


def test_learning_rate_zero_keeps_initial_weights(samples):
    cfg = TrainConfig(learning_rate=0.0, n_epochs=2, seed=3, **SMALL)
    trained = train_pas(samples, cfg)
    fresh = init_params(trained.architecture, np.random.default_rng(3))
    assert np.array_equal(trained.weights, fresh.weights)


def test_training_is_deterministic(samples):
    cfg = TrainConfig(n_epochs=3, seed=5, **SMALL)
    a = train_pas(samples, cfg, samples[:10])
    b = train_pas(samples, cfg, samples[:10])
    assert np.array_equal(a.weights, b.weights)


def test_final_loss_not_above_initial(samples):
    trained = train_pas(samples, TrainConfig(n_epochs=5, early_stop_metric="none", **SMALL))
    hist = trained.metadata["loss_history"]
    assert len(hist) == 6
    assert hist[-1] <= hist[0]


def test_listwise_overfits_single_sample(samples):
    one = samples[:1]
    cfg = TrainConfig(learning_rate=0.1, momentum=0.9, n_epochs=400, batch_size=1,
                      early_stop_metric="none", **SMALL)
    trained = train_pas(one, cfg)
    logits = forward(trained, one[0].features)
    p = np.exp(logits - logits.max())
    p /= p.sum()
    target = one[0].labels / one[0].labels.sum()
    assert np.max(np.abs(p - target)) < 0.02


def test_regression_constant_labels_converge():
    rng = np.random.default_rng(1)
    data = [TrainingSample(rng.normal(size=(4, 3)), np.full(4, 0.7), np.ones(4)) for _ in range(20)]
    cfg = TrainConfig(learning_rate=0.05, momentum=0.9, n_epochs=200, early_stop_metric="none", **SMALL)
    params = train_regression(data, "b_times_ctr", cfg)
    pred = forward(params, np.stack([d.features for d in data])) * params.architecture["target_scale"]
    assert np.mean(np.abs(pred - 0.7)) < 0.01
    assert np.max(np.abs(pred - 0.7)) < 0.05


def test_regctr_scores_bid_times_output(auctions):
    samples = [make_sample(a, include_bid=False) for a in auctions]
    params = train_regression(samples, "ctr_only", TrainConfig(n_epochs=2, **SMALL))
    assert params.architecture["include_bid"] is False
    assert params.architecture["score_mode"] == "bid_times"
    a = auctions[0]
    x = instance_features(a, include_bid=False)
    assert np.allclose(model_scores(params, x, a.bids), a.bids * forward(params, x))


def test_regression_is_pointwise_by_default(samples):
    params = train_regression(samples, "b_times_ctr", TrainConfig(n_epochs=1, **SMALL))
    assert params.architecture["aggregations"] == []
    setwise = train_regression(samples, "b_times_ctr", TrainConfig(n_epochs=1, regression_pointwise=False, **SMALL))
    assert setwise.architecture["aggregations"] == ["mean", "max"]


def test_unknown_regression_target(samples):
    with pytest.raises(ValueError):
        train_regression(samples, "clicks", TrainConfig(**SMALL))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_is_reported(samples):
    with pytest.raises(TrainingDiverged, match="learning_rate"):
        train_regression(samples, "b_times_ctr",
                         TrainConfig(learning_rate=1e300, n_epochs=3, encoder_widths=(8,), head_widths=()))


def test_empty_or_ragged_dataset(samples):
    with pytest.raises(ValueError):
        train_pas([], TrainConfig(**SMALL))
    odd = TrainingSample(np.zeros((2, samples[0].features.shape[1])), np.ones(2), np.ones(2))
    with pytest.raises(ValueError):
        train_pas([samples[0], odd], TrainConfig(**SMALL))


def test_early_stopping_keeps_best_validation(samples):
    cfg = TrainConfig(n_epochs=6, patience=2, **SMALL)
    trained = train_pas(samples[:40], cfg, samples[40:])
    assert trained.metadata["best_val_swr"] == pytest.approx(validation_swr(trained, samples[40:], 2, 3))


def test_validation_swr_perfect_and_worst_scorer():
    from preauction.learning import ScorerParams, make_architecture

    rng = np.random.default_rng(2)
    labels = [rng.uniform(0.1, 1, 5) for _ in range(3)]
    data = [TrainingSample(np.log(y)[:, None], y, np.ones(5)) for y in labels]
    arch = make_architecture(1, head_widths=(), aggregations=())
    # a linear head reading its only feature: identity or negated
    assert validation_swr(ScorerParams(arch, np.array([1.0, 0.0])), data, 2, 3) == pytest.approx(1.0)
    worst = np.mean([np.sort(y)[:2].sum() / np.sort(y)[-2:].sum() for y in labels])
    assert validation_swr(ScorerParams(arch, np.array([-1.0, 0.0])), data, 2, 2) == pytest.approx(worst)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(early_stop_metric="loss")
