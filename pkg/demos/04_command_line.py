"""Drive every CLI subcommand from Python, in a scratch directory.

The same steps from a shell:

    preauction generate --seed 1 --out auctions.jsonl
    preauction train --config run.cfg --out model.bin
    preauction ic-test --config run.cfg --model model.bin
    preauction evaluate --config run.cfg --out results.csv
    preauction report --config run.cfg --model model.bin
    preauction oracle-check

Run: python demos/04_command_line.py
"""

import tempfile
from pathlib import Path

from preauction.harness.cli import main

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    cfg = tmp / "run.cfg"
    cfg.write_text(
        "# flat key = value settings\n"
        "preset = tiny\n"
        "n_auctions = 80\n"
        "n_repetitions = 2\n"
        "n_epochs = 5\n"
        "strategies = gdy, pas-exact, pas-learned, regctr, oracle\n"
    )
    steps = [
        ["generate", "--seed", "1", "--out", tmp / "auctions.jsonl"],
        ["train", "--config", cfg, "--out", tmp / "model.bin"],
        ["ic-test", "--config", cfg, "--model", tmp / "model.bin", "--out", tmp / "ic.csv"],
        ["evaluate", "--config", cfg, "--out", tmp / "results.csv"],
        ["report", "--config", cfg, "--model", tmp / "model.bin", "--out", tmp / "traces.csv"],
        ["oracle-check", "--out", tmp / "oracle.csv"],
    ]
    for argv in steps:
        print(f"$ preauction {' '.join(str(a.name) if isinstance(a, Path) else a for a in argv)}")
        assert main([str(a) for a in argv]) == 0
    print()
    print((tmp / "ic.csv").read_text())
