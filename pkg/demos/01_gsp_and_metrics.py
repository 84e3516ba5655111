"""A single GSP auction, then the three pre-auction quality metrics.

Run: python demos/01_gsp_and_metrics.py
"""

import numpy as np

from preauction import compute_metrics, gsp_run

# Three ads compete for two slots. Each ad's score is bid x refined ctr.
bids = np.array([3.0, 2.0, 1.0])
ctrs = np.array([0.5, 0.4, 0.6])
outcome = gsp_run(bids, ctrs, k=2)

print("scores:", bids * ctrs)
print("slot -> ad:", outcome.allocation)
for ad, pay in zip(outcome.winners, outcome.payments_per_click):
    # each winner pays just enough per click to keep its slot
    print(f"  ad {ad} pays {pay:.4f} per click (bid {bids[ad]})")
print("expected revenue:", round(outcome.expected_revenue, 12))

# Suppose the first stage only let ads 0 and 2 through. The metrics compare
# that subset's auction with the auction over every candidate.
report = compute_metrics({0, 2}, bids, ctrs, k=2)
print(f"SWr@2 = {report.swr:.4f}  Recall@2 = {report.recall:.2f}  REVr@2 = {report.revr:.4f}")
