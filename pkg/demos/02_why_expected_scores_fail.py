"""Ranking ads by expected score can pick the wrong subset.

Two ads have certain scores. A third usually scores nothing but
occasionally scores far above both. With room for two ads and one slot, the
greedy rule keeps the two certain ads, yet swapping in the risky one raises
the expected winning score. Exact PAS, lazy greedy and brute force all see it.

Run: python demos/02_why_expected_scores_fail.py
"""

from preauction import (
    brute_force_optimal_subset,
    generate_example1,
    lazy_greedy_subset,
    pas_exact,
    simpa_objective,
)

inst = generate_example1(3, 2, 1, t=20, det_values=(1.0, 0.96), j_score=0.95)
print("expected scores:", [round(float(s), 4) for s in inst.coarse_scores])
for i, d in enumerate(inst.dists):
    print(f"  ad {i}: bid {inst.bids[i]:.2f}, ctr support {d.support}")

gdy = sorted(range(3), key=lambda i: -inst.coarse_scores[i])[:2]
print("GDY keeps", gdy, "-> objective", simpa_objective(gdy, inst))

pas = pas_exact(inst).probs
print("PAS (chance of winning the slot):", [round(float(p), 4) for p in pas])
print("lazy greedy:", lazy_greedy_subset(inst))
print("brute force:", brute_force_optimal_subset(inst))
