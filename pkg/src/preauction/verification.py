"""Small-instance verification suite: exact algorithms against exhaustive search."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .auction import gsp_run
from .env import CtrDistribution, SimpaInstance, generate_example1, set_cover_to_simpa
from .selection import (
    brute_force_optimal_subset,
    expected_recall,
    lazy_greedy_subset,
    pas_exact,
    select_by_scores,
    select_gdy,
    simpa_objective,
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_simpa(rng: np.random.Generator, n_max: int = 8, m_max: int = 4, k_max: int = 2,
                 support_max: int = 3, n_min: int = 2) -> SimpaInstance:
    """Random independent-CTR instance with 1 <= K <= M <= N."""
    n = int(rng.integers(n_min, n_max + 1))
    m = int(rng.integers(1, min(m_max, n) + 1))
    k = int(rng.integers(1, min(k_max, m) + 1))
    dists = []
    for _ in range(n):
        size = int(rng.integers(1, support_max + 1))
        values = rng.choice(np.arange(1, 100), size=size, replace=False) / 100.0
        dists.append(CtrDistribution(values, rng.dirichlet(np.ones(size))))
    return SimpaInstance(rng.uniform(0.1, 1.0, size=n), tuple(dists), m=m, k=k)


def check_recall_oracle(n_instances: int = 200, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        inst = random_simpa(rng)
        chosen = select_by_scores(pas_exact(inst).probs, inst.m).selected
        got = expected_recall(chosen, inst)
        best = max(expected_recall(c, inst) for c in itertools.combinations(range(inst.n_ads), inst.m))
        worst = max(worst, best - got)
    return CheckResult("pas-recall-oracle", bool(worst <= tol), f"max shortfall {worst:.3g}")


def check_recall_identity(n_instances: int = 200, seed: int = 1, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        inst = random_simpa(rng)
        size = int(rng.integers(0, inst.n_ads + 1))
        subset = rng.choice(inst.n_ads, size=size, replace=False)
        pas = pas_exact(inst).probs
        worst = max(worst, abs(expected_recall(subset, inst) - pas[subset].sum()))
    return CheckResult("recall-identity", bool(worst <= tol), f"max deviation {worst:.3g}")


def check_submodularity(n_instances: int = 100, seed: int = 2, tol: float = 1e-9) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = 0
    greedy_ratio = math.inf
    for _ in range(n_instances):
        inst = random_simpa(rng, n_max=6, m_max=6, k_max=3)
        n = inst.n_ads
        f = {}
        for mask in range(1 << n):
            f[mask] = simpa_objective([i for i in range(n) if mask >> i & 1], inst)
        for a in range(1 << n):
            for b in range(1 << n):
                if a & ~b:
                    continue
                if f[a] > f[b] + tol:
                    bad += 1
                for x in range(n):
                    if b >> x & 1:
                        continue
                    if f[a | 1 << x] - f[a] < f[b | 1 << x] - f[b] - tol:
                        bad += 1
        _, opt = brute_force_optimal_subset(inst)
        _, got = lazy_greedy_subset(inst)
        if opt > 0:
            greedy_ratio = min(greedy_ratio, got / opt)
        if got < (1 - 1 / math.e) * opt - tol:
            bad += 1
    return CheckResult("submodular-monotone", bad == 0,
                       f"{bad} violations; worst greedy/opt ratio {greedy_ratio:.4f}")


def set_cover_exists(universe_size: int, subsets, m: int) -> bool:
    full = set(range(universe_size))
    return any(set().union(*c) == full for c in itertools.combinations(subsets, min(m, len(subsets))))


def check_set_cover_reduction(max_universe: int = 4, max_subsets: int = 4) -> CheckResult:
    n_checked = mismatches = 0
    for universe in range(1, max_universe + 1):
        nonempty = [tuple(e for e in range(universe) if mask >> e & 1) for mask in range(1, 1 << universe)]
        for n_sub in range(1, max_subsets + 1):
            for family in itertools.combinations(nonempty, n_sub):
                for m in range(1, n_sub + 1):
                    _, opt = brute_force_optimal_subset(set_cover_to_simpa(universe, family, m))
                    n_checked += 1
                    if (abs(opt - 1.0) <= 1e-12) != set_cover_exists(universe, family, m):
                        mismatches += 1
    return CheckResult("set-cover-reduction", mismatches == 0,
                       f"{mismatches} mismatches over {n_checked} instances")


def check_gdy_optimal_at_m_equals_k(n_instances: int = 200, seed: int = 3, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        inst = random_simpa(rng, n_max=7, m_max=3, k_max=3)
        inst = SimpaInstance(inst.bids, inst.dists, m=inst.m, k=inst.m)
        chosen = select_gdy(inst.bids, inst.coarse_scores / inst.bids, inst.m).selected
        _, opt = brute_force_optimal_subset(inst)
        worst = max(worst, opt - simpa_objective(chosen, inst))
    return CheckResult("gdy-optimal-m-eq-k", bool(worst <= tol), f"max gap {worst:.3g}")


def check_gdy_gap_instance(tol: float = 1e-12) -> CheckResult:
    inst = generate_example1(3, 2, 1, t=20, det_values=(1.0, 0.96), j_score=0.95)
    _, opt = brute_force_optimal_subset(inst)
    gdy = simpa_objective(select_gdy(inst.bids, inst.coarse_scores / inst.bids, inst.m).selected, inst)
    ok = abs(opt - 1.9) <= tol and abs(gdy - 1.0) <= tol
    return CheckResult("gdy-gap-instance", ok, f"oracle {opt:.12g} vs gdy {gdy:.12g}")


def check_gsp_worked_example(tol: float = 1e-12) -> CheckResult:
    out = gsp_run([3.0, 2.0, 1.0], [0.5, 0.4, 0.6], 2)
    pays = [float(p) for p in out.payments_per_click]
    ok = (out.winners == (0, 1)
          and max(abs(pays[0] - 1.6), abs(pays[1] - 1.5)) <= tol
          and abs(out.expected_revenue - 1.4) <= tol)
    return CheckResult("gsp-worked-example", ok,
                       f"payments ({pays[0]:.12g}, {pays[1]:.12g}), revenue {out.expected_revenue:.12g}")


def run_oracle_suite(seed: int = 0) -> list:
    """All checks; ``seed`` offsets the random-instance streams."""
    return [
        check_recall_oracle(seed=seed),
        check_recall_identity(seed=seed + 1),
        check_submodularity(seed=seed + 2),
        check_set_cover_reduction(),
        check_gdy_optimal_at_m_equals_k(seed=seed + 3),
        check_gdy_gap_instance(),
        check_gsp_worked_example(),
    ]
