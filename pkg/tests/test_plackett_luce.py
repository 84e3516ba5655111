import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from preauction.learning import (
    listwise_loss,
    listwise_loss_grad,
    mse_loss,
    mse_loss_grad,
    pl_permutation_prob,
    pl_prob_in_topk,
    pl_top1,
)

positive = st.floats(0.01, 100.0)


def _topk_oracle(y, k):
    """Exact rational P(item in first k) by recursing over which item is drawn next."""
    y = [Fraction(v) for v in y]

    def rec(remaining, slots):
        out = {i: Fraction(0) for i in remaining}
        if slots == 0:
            return out
        total = sum(y[i] for i in remaining)
        for i in remaining:
            p = y[i] / total
            out[i] += p
            rest = rec(tuple(j for j in remaining if j != i), slots - 1)
            for j, v in rest.items():
                out[j] += p * v
        return out

    res = rec(tuple(range(len(y))), k)
    return [res[i] for i in range(len(y))]


def test_permutation_prob_examples():
    assert pl_permutation_prob([0, 1], [3, 1]) == pytest.approx(0.75)
    assert pl_permutation_prob([1, 0], [3, 1]) == pytest.approx(0.25)
    assert pl_permutation_prob([0], [2.5]) == 1.0


def test_equal_weights_uniform_over_orders():
    for perm in itertools.permutations(range(4)):
        assert pl_permutation_prob(perm, [2.0] * 4) == pytest.approx(1 / 24, abs=1e-15)


def test_permutation_prob_rejects_bad_input():
    with pytest.raises(ValueError):
        pl_permutation_prob([0, 1], [1.0, 0.0])
    with pytest.raises(ValueError):
        pl_permutation_prob([0, 0], [1.0, 2.0])


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_permutation_probs_normalized(n):
    rng = np.random.default_rng(n)
    for _ in range(100 // 6 + 1):
        y = rng.uniform(0.01, 10, size=n)
        total = sum(pl_permutation_prob(p, y) for p in itertools.permutations(range(n)))
        assert total == pytest.approx(1.0, abs=1e-9)


def test_top1_examples():
    assert np.allclose(pl_top1([2, 1, 1]), [0.5, 0.25, 0.25])
    assert np.allclose(pl_top1([1, 1]), [0.5, 0.5])


@given(st.lists(positive, min_size=1, max_size=20))
def test_top1_sums_to_one(y):
    assert pl_top1(y).sum() == pytest.approx(1.0, abs=1e-12)


def test_topk_example_exact_fractions():
    got = pl_prob_in_topk([3, 2, 1], 2)
    assert _topk_oracle([3, 2, 1], 2) == [Fraction(51, 60), Fraction(44, 60), Fraction(25, 60)]
    assert np.allclose(got, [51 / 60, 44 / 60, 25 / 60], atol=1e-12, rtol=0)


def test_topk_matches_recursive_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 7))
        y = rng.integers(1, 20, size=n)
        k = int(rng.integers(1, n + 1))
        expected = [float(v) for v in _topk_oracle(y.tolist(), k)]
        assert np.allclose(pl_prob_in_topk(y, k), expected, atol=1e-12)


def test_topk_edge_cases():
    y = [0.5, 2.0, 1.0, 3.0]
    assert np.allclose(pl_prob_in_topk(y, 4), 1.0)
    assert np.allclose(pl_prob_in_topk(y, 1), pl_top1(y), atol=1e-15)
    with pytest.raises(ValueError):
        pl_prob_in_topk(np.ones(9), 2)
    with pytest.raises(ValueError):
        pl_prob_in_topk(y, 0)


def test_lemma_order_consistency():
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 100:
        n = int(rng.integers(3, 8))
        y = rng.uniform(0.1, 10, size=n)
        if np.unique(y).size < n:
            continue
        k = int(rng.integers(2, n))
        probs = pl_prob_in_topk(y, k)
        order = np.argsort(-y)
        assert np.all(np.diff(probs[order]) < 0)
        checked += 1


# -- listwise loss ----------------------------------------------------------------------

def test_listwise_loss_examples():
    assert listwise_loss([0.0, 0.0], [1.0, 1.0]) == pytest.approx(math.log(2), abs=1e-12)
    y = np.array([3.0, 1.0, 0.5])
    p = y / y.sum()
    entropy = -(p * np.log(p)).sum()
    assert listwise_loss(np.log(y), y) == pytest.approx(entropy, abs=1e-12)


@given(st.lists(st.tuples(st.floats(-20, 20), positive), min_size=1, max_size=10), st.floats(-50, 50))
def test_listwise_loss_shift_invariant(pairs, c):
    f = np.array([a for a, _ in pairs])
    y = np.array([b for _, b in pairs])
    assert listwise_loss(f + c, y) == pytest.approx(listwise_loss(f, y), abs=1e-12)


def test_listwise_loss_minimized_at_log_labels():
    rng = np.random.default_rng(2)
    y = rng.uniform(0.1, 5, size=6)
    best = listwise_loss(np.log(y), y)
    for _ in range(50):
        assert listwise_loss(np.log(y) + rng.normal(scale=0.3, size=6), y) >= best - 1e-12


def test_listwise_loss_stable_for_huge_logits():
    assert np.isfinite(listwise_loss([1000.0, -1000.0], [1.0, 1.0]))


def test_listwise_loss_batch_average():
    f = np.array([[0.0, 1.0], [2.0, -1.0]])
    y = np.array([[1.0, 2.0], [3.0, 1.0]])
    assert listwise_loss(f, y) == pytest.approx((listwise_loss(f[0], y[0]) + listwise_loss(f[1], y[1])) / 2)


def test_listwise_loss_rejects_nonpositive_labels():
    with pytest.raises(ValueError):
        listwise_loss([0.0, 0.0], [1.0, 0.0])


def test_listwise_grad_properties():
    y = np.array([3.0, 1.0, 0.5])
    assert np.allclose(listwise_loss_grad(np.log(y) + 7.0, y), 0.0, atol=1e-15)
    rng = np.random.default_rng(3)
    for _ in range(20):
        g = listwise_loss_grad(rng.normal(size=5), rng.uniform(0.1, 2, size=5))
        assert abs(g.sum()) < 1e-15


def _central_diff(fn, x, h=1e-5):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


def test_listwise_grad_matches_finite_differences():
    rng = np.random.default_rng(4)
    for shape in [(5,), (3, 4)]:
        f = rng.normal(size=shape)
        y = rng.uniform(0.1, 3, size=shape)
        num = _central_diff(lambda z: listwise_loss(z, y), f)
        ana = listwise_loss_grad(f, y)
        assert np.linalg.norm(num - ana) <= 1e-5 * np.linalg.norm(ana)


def test_mse_loss_and_grad():
    assert mse_loss([1.0, 3.0], [1.0, 1.0]) == pytest.approx(2.0)
    rng = np.random.default_rng(5)
    pred, target = rng.normal(size=(2, 6)), rng.normal(size=(2, 6))
    num = _central_diff(lambda z: mse_loss(z, target), pred)
    assert np.linalg.norm(num - mse_loss_grad(pred, target)) <= 1e-5 * np.linalg.norm(num)
