import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from preauction import (
    AdRecord,
    AuctionInstance,
    CtrDistribution,
    compute_metrics,
    expected_social_welfare,
    gsp_revenue,
    gsp_run,
    rank_by_score,
    sum_top_k,
    top_k_indices,
)

finite = st.floats(0.0, 10.0, allow_nan=False)


# -- sum_top_k ---------------------------------------------------------------

@pytest.mark.parametrize("values,k,expected", [
    ([5, 1, 3], 2, 8.0),
    ([], 3, 0.0),
    ([0.8, 0.6, 1.5], 2, 2.3),
])
def test_sum_top_k_examples(values, k, expected):
    assert sum_top_k(values, k) == pytest.approx(expected, abs=1e-12)


@given(st.lists(finite, max_size=12), st.integers(1, 6), finite)
def test_sum_top_k_monotone_under_insertion(values, k, x):
    assert sum_top_k(values + [x], k) >= sum_top_k(values, k) - 1e-12


@given(st.lists(finite, min_size=1, max_size=10), st.integers(1, 12))
def test_sum_top_k_matches_subset_maximum(values, k):
    # oracle: best sum over every subset of size min(k, n)
    size = min(k, len(values))
    best = max(sum(c) for c in itertools.combinations(values, size))
    assert sum_top_k(values, k) == pytest.approx(best, abs=1e-9)


# -- rank_by_score -------------------------------------------------------------

@pytest.mark.parametrize("scores,expected", [
    ((1.5, 0.8, 0.6), (0, 1, 2)),
    ((1.0, 1.0), (0, 1)),
    ((0.6, 1.5, 0.8), (1, 2, 0)),
])
def test_rank_by_score_examples(scores, expected):
    assert tuple(rank_by_score(scores)) == expected


def test_rank_by_score_rejects_nan():
    with pytest.raises(ValueError):
        rank_by_score([1.0, float("nan")])


@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=9, unique=True), st.randoms())
def test_rank_equivariant_under_permutation(scores, rnd):
    perm = list(range(len(scores)))
    rnd.shuffle(perm)
    permuted = [scores[p] for p in perm]
    ranked = rank_by_score(permuted)
    # mapping permuted positions back gives the original ranking
    assert [perm[i] for i in ranked] == list(rank_by_score(scores))


def test_top_k_indices_tie_break():
    assert list(top_k_indices([1.0, 2.0, 2.0, 0.5], 2)) == [1, 2]


# -- gsp_run -------------------------------------------------------------------

def test_gsp_worked_example():
    out = gsp_run((3, 2, 1), (0.5, 0.4, 0.6), 2)
    assert out.winners == (0, 1)
    assert out.allocation == {1: 0, 2: 1}
    assert out.payments_per_click[0] == pytest.approx(1.6, abs=1e-12)
    assert out.payments_per_click[1] == pytest.approx(1.5, abs=1e-12)
    assert out.expected_revenue == pytest.approx(1.4, abs=1e-12)


def test_gsp_single_bidder_pays_nothing():
    out = gsp_run((1,), (0.5,), 1)
    assert out.winners == (0,)
    assert out.payments_per_click == (0.0,)
    assert out.expected_revenue == 0.0


def test_gsp_tie_goes_to_lower_index_and_pays_own_bid():
    out = gsp_run((2, 2), (0.3, 0.3), 1)
    assert out.winners == (0,)
    assert out.payments_per_click[0] == pytest.approx(2.0, abs=1e-12)
    assert out.expected_revenue == pytest.approx(0.6, abs=1e-12)


def test_gsp_all_zero_scores():
    out = gsp_run((1, 1, 1), (0, 0, 0), 2)
    assert out.winners == (0, 1)
    assert out.payments_per_click == (0.0, 0.0)


def test_gsp_slot_of():
    out = gsp_run((3, 2, 1), (0.5, 0.4, 0.6), 2)
    assert [out.slot_of(i) for i in range(3)] == [1, 2, 0]


@pytest.mark.parametrize("bids,ctrs,k", [
    ((1, 2), (0.5,), 1),
    ((1,), (1.5,), 1),
    ((-1,), (0.5,), 1),
    ((1,), (0.5,), 0),
])
def test_gsp_rejects_bad_input(bids, ctrs, k):
    with pytest.raises(ValueError):
        gsp_run(bids, ctrs, k)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.floats(0, 5, allow_nan=False), st.floats(0, 1)), min_size=1, max_size=8),
       st.integers(1, 5))
def test_gsp_ir_and_critical_price(pairs, k):
    b = np.array([p[0] for p in pairs])
    c = np.array([p[1] for p in pairs])
    out = gsp_run(b, c, k)
    s = b * c
    order = np.argsort(-s, kind="stable")
    for j, (ad, pay) in enumerate(zip(out.winners, out.payments_per_click)):
        assert pay <= b[ad] + 1e-12
        runner = s[order[j + 1]] if j + 1 < len(b) else 0.0
        assert pay * c[ad] == pytest.approx(runner, abs=1e-12)
    assert out.expected_revenue == pytest.approx(gsp_revenue(s, k), abs=1e-12)


def test_gsp_revenue_matches_rev_definition():
    assert gsp_revenue([1.5, 0.8, 0.6], 2) == pytest.approx(1.4)
    assert gsp_revenue([1.5], 1) == 0.0


# -- welfare and metrics ---------------------------------------------------------

@pytest.mark.parametrize("bids,ctrs,k,expected", [
    ((3, 2, 1), (0.5, 0.4, 0.6), 2, 2.3),
    ((1,), (0,), 1, 0.0),
    ((2, 2), (0.3, 0.3), 3, 1.2),
])
def test_expected_social_welfare(bids, ctrs, k, expected):
    assert expected_social_welfare(bids, ctrs, k) == pytest.approx(expected, abs=1e-12)


def test_metrics_worked_example():
    bids = np.array([3.0, 2.0, 1.0])
    ctrs = np.array([0.5, 0.4, 0.6])
    m = compute_metrics({0, 2}, bids, ctrs, 2)
    assert m.swr == pytest.approx(2.1 / 2.3, abs=1e-12)
    assert m.recall == 0.5
    # REV over {1.5, 0.6} is 0.6; over all it is 1.4
    assert m.revr == pytest.approx(0.6 / 1.4, abs=1e-12)


def test_metrics_full_selection_is_one():
    rng = np.random.default_rng(0)
    b, c = rng.uniform(0.1, 1, 7), rng.uniform(0.01, 0.5, 7)
    m = compute_metrics(range(7), b, c, 3)
    assert (m.swr, m.recall, m.revr) == (1.0, 1.0, 1.0)


def test_metrics_disjoint_selection_has_zero_recall():
    b = np.array([5.0, 4.0, 3.0, 2.0, 1.0])
    c = np.full(5, 0.5)
    assert compute_metrics({3, 4}, b, c, 2).recall == 0.0


def test_metrics_short_selection_divides_recall_by_k():
    b = np.array([5.0, 4.0, 3.0])
    assert compute_metrics({0}, b, np.full(3, 0.5), 2).recall == 0.5


def test_metrics_degenerate_zero_welfare():
    assert compute_metrics({0}, np.ones(3), np.zeros(3), 2).swr == 1.0


def test_metrics_accepts_auction_instance():
    ads = [AdRecord(i, b, [0.3]) for i, b in enumerate((3.0, 2.0, 1.0))]
    inst = AuctionInstance(ads, [], 2, 2, (CtrDistribution.point(0.3),))
    m = compute_metrics({0, 1}, inst, [0.5, 0.4, 0.6], 2)
    assert m.swr == pytest.approx(1.0)


def test_metrics_rejects_empty_or_foreign_selection():
    with pytest.raises(ValueError):
        compute_metrics(set(), np.ones(2), np.ones(2) * 0.5, 1)
    with pytest.raises(ValueError):
        compute_metrics({5}, np.ones(2), np.ones(2) * 0.5, 1)


# -- AuctionInstance -------------------------------------------------------------

def _ads(n):
    return [AdRecord(i, 1.0 + i, [0.1, 0.0]) for i in range(n)]


def test_instance_validation():
    table = (CtrDistribution.point(0.1),)
    with pytest.raises(ValueError):
        AuctionInstance(_ads(3), [], 3, 2, table)  # K > M
    with pytest.raises(ValueError):
        AuctionInstance(_ads(2) + [AdRecord(0, 1.0, [0.1])], [], 1, 1, table)
    with pytest.raises(ValueError):
        AuctionInstance(_ads(3), [], 1, 1, ())
    with pytest.raises(ValueError):
        AuctionInstance(_ads(3), [], 1, 1, table, realized_ctrs=[0.1, 2.0, 0.3])
    with pytest.raises(ValueError):
        AdRecord(0, -1.0)


def test_instance_with_bid_changes_one_ad():
    inst = AuctionInstance(_ads(3), [0.5], 1, 2, (CtrDistribution.point(0.1),))
    new = inst.with_bid(1, 9.0)
    assert list(new.bids) == [1.0, 9.0, 3.0]
    assert list(inst.bids) == [1.0, 2.0, 3.0]
    assert np.array_equal(new.partial_matrix, inst.partial_matrix)
