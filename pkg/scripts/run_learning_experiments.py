#!/usr/bin/env python3
"""End-to-end desk-scale learning runs: synthesize data, normalize, learn.

Produces out/exp1, out/exp2, out/exp3 with reports and summary tables.
Pass --skip-exp1 to run only the dataset-driven experiments.
"""
import sys

from posauctions.cli import main


def run() -> int:
    args = sys.argv[1:]
    rc = main(["--seed", "1234", "--out", "out", "dataset", "synth",
               "--advertisers", "10", "--records", "400"])
    rc |= main(["--seed", "1234", "--out", "out", "dataset", "normalize",
                "--mode", "advertisers", "--input", "out/raw_bids.csv"])
    rc |= main(["--seed", "1234", "--out", "out", "dataset", "normalize",
                "--mode", "auctions", "--input", "out/raw_bids.csv",
                "--name", "normalized_auctions.csv"])
    if "--skip-exp1" not in args:
        rc |= main(["--out", "out/exp1", "--config", "configs/exp1_desk.json",
                    "learn", "exp1"])
    rc |= main(["--out", "out/exp2", "--config", "configs/exp2_desk.json", "learn", "exp2"])
    rc |= main(["--out", "out/exp3", "--config", "configs/exp3_desk.json", "learn", "exp3"])
    return rc


if __name__ == "__main__":
    sys.exit(run())
