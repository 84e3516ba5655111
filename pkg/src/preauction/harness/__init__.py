"""Experiment plumbing: auction logs, configuration, runs and the CLI."""

from .experiment import (
    CSV_HEADER,
    METRICS,
    ExperimentConfig,
    ExperimentResult,
    format_table,
    repetition_rng,
    run_experiment,
    split_counts,
    train_learned,
    write_results_csv,
)
from .logio import (
    SCHEMA_VERSION,
    AuctionLogError,
    dumps_record,
    instance_to_record,
    load_auction_log,
    record_to_instance,
    save_auction_log,
)
