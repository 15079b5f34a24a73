#!/usr/bin/env python3
"""Certify the bad-equilibrium instances and report their welfare ratios."""
import sys

from posauctions.cli import main

if __name__ == "__main__":
    sys.exit(main(["--seed", "1", "--out", "out/poa", "poa"] + sys.argv[1:]))
