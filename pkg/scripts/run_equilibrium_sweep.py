#!/usr/bin/env python3
"""Closed-form vs Monte-Carlo revenue across the default discount grid."""
import sys

from posauctions.cli import main

if __name__ == "__main__":
    sys.exit(main(["--seed", "1", "--out", "out/equilibrium", "equilibrium",
                   "--samples", "1000000"] + sys.argv[1:]))
