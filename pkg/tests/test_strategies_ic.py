import numpy as np
import pytest

from preauction import generate_auctions, gsp_run, preset
from preauction.auction import AuctionOutcome
from preauction.ic import (
    IcReport,
    PerturbationTest,
    ic_failure_rate,
    is_monotone_step,
    run_perturbation_test,
    verify_gsp_conditions,
    write_ic_csv,
)
from preauction.learning import TrainConfig, make_sample, train_pas
from preauction.strategies import STRATEGY_NAMES, build_strategy


@pytest.fixture(scope="module")
def tiny():
    return generate_auctions(preset("tiny"), 30, np.random.default_rng(0))


# -- monotone-step pattern ---------------------------------------------------------

@pytest.mark.parametrize("entered,ok", [
    ("FFTTT", True),
    ("FFTFT", False),
    ("TTTTT", True),
    ("FFFFF", True),
    ("TF", False),
    ("", True),
])
def test_is_monotone_step(entered, ok):
    assert is_monotone_step([c == "T" for c in entered]) is ok


def test_perturbation_threshold():
    t = PerturbationTest(0, 0, (0.2, 0.4, 0.6, 0.8), (False, False, True, True))
    assert t.passed and t.threshold == 0.6
    assert PerturbationTest(0, 0, (1.0, 2.0), (False, False)).threshold is None
    assert PerturbationTest(0, 0, (1.0, 2.0), (True, False)).threshold is None


def test_perturbation_validation():
    with pytest.raises(ValueError):
        PerturbationTest(0, 0, (1.0, 1.0), (True, True))
    with pytest.raises(ValueError):
        PerturbationTest(0, 0, (0.0, 1.0), (True, True))
    with pytest.raises(ValueError):
        PerturbationTest(0, 0, (1.0, 2.0), (True,))


# -- strategies under bid perturbation ---------------------------------------------------

@pytest.mark.parametrize("name", ["gdy", "constant", "pas-exact", "pas-mc", "greedy-submodular"])
def test_monotone_strategies_never_fail(name, tiny):
    report = ic_failure_rate(build_strategy(name), tiny)
    assert report.n_tests == sum(a.n_ads for a in tiny)
    assert report.n_failures == 0


def test_oracle_strategy_runs(tiny):
    res = build_strategy("oracle").select(tiny[0])
    assert len(res.selected) == tiny[0].subset_size


def test_gdy_sweep_matches_rescoring(tiny):
    gdy = build_strategy("gdy")
    a = tiny[0]
    bids = [0.3, 1.7]
    fast = gdy.sweep_scores(a, 2, bids)
    for row, b in zip(fast, bids):
        assert np.allclose(row, gdy.scores(a.with_bid(2, b)))


def test_learned_sweep_matches_rescoring(tiny):
    params = train_pas([make_sample(a) for a in tiny], TrainConfig(n_epochs=2, encoder_widths=(4,), head_widths=(4,)))
    strat = build_strategy("pas-learned", params)
    a = tiny[1]
    bids = np.array([0.5, 1.0, 2.0]) * a.bids[3]
    fast = strat.sweep_scores(a, 3, bids)
    for row, b in zip(fast, bids):
        assert np.allclose(row, strat.scores(a.with_bid(3, b)), atol=1e-12)
    report = ic_failure_rate(strat, tiny, ads_per_auction=2, seed=1)
    assert report.n_tests == 60
    assert 0 <= report.failure_rate <= 1


def test_stochastic_strategy_is_rejected(tiny):
    with pytest.raises(ValueError, match="stochastic"):
        run_perturbation_test(build_strategy("pas-mc", seed=None), tiny[0], 0)


def test_unknown_ad_and_strategy(tiny):
    with pytest.raises(ValueError):
        run_perturbation_test(build_strategy("gdy"), tiny[0], 99)
    with pytest.raises(ValueError, match="unknown strategy"):
        build_strategy("magic")
    with pytest.raises(ValueError):
        build_strategy("reg")
    assert "pas-learned" in STRATEGY_NAMES


def test_ads_per_auction_sampling_is_seeded(tiny):
    a = ic_failure_rate(build_strategy("gdy"), tiny, ads_per_auction=2, seed=4)
    assert a.n_tests == 2 * len(tiny)
    with pytest.raises(ValueError):
        ic_failure_rate(build_strategy("gdy"), [])


def test_ic_csv(tmp_path):
    path = tmp_path / "ic.csv"
    write_ic_csv([IcReport("gdy", 10, 0, 3), IcReport("x", 4, 1, 3)], path)
    assert path.read_text() == "strategy,n_tests,failures,failure_rate,seed\ngdy,10,0,0.0,3\nx,4,1,0.25,3\n"


# -- GSP conditions ----------------------------------------------------------------------

def test_gsp_conditions_worked_example():
    bids, ctrs = (3.0, 2.0, 1.0), (0.5, 0.4, 0.6)
    out = gsp_run(bids, ctrs, 2)
    assert verify_gsp_conditions(out, bids, ctrs)
    tampered = AuctionOutcome(out.winners, (out.payments_per_click[0] + 0.1, out.payments_per_click[1]),
                              out.expected_revenue)
    assert not verify_gsp_conditions(tampered, bids, ctrs)
    swapped = AuctionOutcome(out.winners[::-1], out.payments_per_click, out.expected_revenue)
    assert not verify_gsp_conditions(swapped, bids, ctrs)


def test_gsp_conditions_single_bidder():
    assert verify_gsp_conditions(gsp_run((1.0,), (0.5,), 1), (1.0,), (0.5,))


def test_gsp_conditions_rejects_mismatch():
    out = gsp_run((3.0, 2.0), (0.5, 0.4), 1)
    with pytest.raises(ValueError):
        verify_gsp_conditions(out, (3.0, 2.0, 1.0), (0.5, 0.4))
    with pytest.raises(ValueError):
        verify_gsp_conditions(AuctionOutcome((0, 1), (0.1,), 0.0), (3.0, 2.0), (0.5, 0.4))


def test_gsp_conditions_fuzz():
    rng = np.random.default_rng(9)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        bids = rng.uniform(0, 3, n)
        ctrs = rng.uniform(0, 1, n)
        assert verify_gsp_conditions(gsp_run(bids, ctrs, int(rng.integers(1, n + 1))), bids, ctrs)
