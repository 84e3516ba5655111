"""Pre-auction subset selection for two-stage ad auctions.

The first stage sees only coarse CTR estimates and must pick M of N ads;
the second stage runs a GSP auction for K slots with refined CTRs. The
package provides the auction mechanics, a synthetic environment, exact and
sampled selection algorithms, learned scorers, and IC testing tools.
"""

from .auction import (
    AdRecord,
    AuctionInstance,
    AuctionOutcome,
    MetricsReport,
    compute_metrics,
    expected_social_welfare,
    gsp_revenue,
    gsp_run,
    rank_by_score,
    sum_top_k,
    top_k_indices,
)
from .env import (
    PRESETS,
    CtrDistribution,
    EnvConfig,
    JointTable,
    SimpaInstance,
    calibrate_downsampled,
    coarse_ctr,
    generate_auction,
    generate_auctions,
    generate_example1,
    preset,
    sample_realization,
    sample_realizations,
    set_cover_to_simpa,
)
from .ic import (
    DEFAULT_FACTORS,
    IcReport,
    PerturbationTest,
    ic_failure_rate,
    is_monotone_step,
    run_perturbation_test,
    verify_gsp_conditions,
)
from .selection import (
    PasScores,
    SelectionResult,
    StateSpaceTooLarge,
    brute_force_optimal_subset,
    expected_recall,
    lazy_greedy_subset,
    outcome_table,
    pas_exact,
    pas_monte_carlo,
    select_by_scores,
    select_gdy,
    simpa_objective,
    simpa_objective_mc,
)
from .strategies import STRATEGY_NAMES, Strategy, build_strategy

__version__ = "0.1.0"
