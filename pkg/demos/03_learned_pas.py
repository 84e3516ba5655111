"""Train the learned PAS scorer and the regression baselines on synthetic logs.

The public1-like preset hides a user intent that only shows through the
candidate set, so a set-aware scorer can outrank pointwise regressions.
This demo uses a small run (a minute or two on one core). The acceptance
suite runs the full-size version.

Run: python demos/03_learned_pas.py
"""

from preauction import preset
from preauction.harness import ExperimentConfig, format_table, run_experiment
from preauction.harness.experiment import prepare_split, train_learned
from preauction.ic import ic_failure_rate
from preauction.learning import TrainConfig
from preauction.strategies import build_strategy

config = ExperimentConfig(
    env=preset("public1-like"),
    strategies=("gdy", "pas-learned", "reg", "regctr"),
    n_auctions=900,
    split=(4, 1, 1),
    metrics_k=(5,),
    master_seed=3,
    train=TrainConfig(n_epochs=10),
)
result = run_experiment(config)
print(format_table(result))

# The learned scorer has no built-in monotonicity guarantee, so measure it:
# scale one ad's bid over a grid and check its entry pattern is a single step.
train, val, test, seed = prepare_split(config, 0)
params = train_learned("pas-learned", train, val, TrainConfig(n_epochs=10, seed=seed))
report = ic_failure_rate(build_strategy("pas-learned", params), test, ads_per_auction=10)
print(f"learned PAS: {report.n_failures} non-monotone of {report.n_tests} bid sweeps")
