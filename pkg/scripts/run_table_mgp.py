#!/usr/bin/env python3
"""Overcounting table for the multiplicative-gamma sampler.

Runs the 10x3 and 30x5 designs at 10 replicates each with the default run
lengths (30000 sweeps, 10000 burn-in) and prints per-design aggregates.
The interesting outputs are the mean modal active-column count (expected to
sit above the true rank — this prior shrinks but never truncates exactly)
and the posterior means of the column-strength shapes a1, a2 in the
replicate CSV: a2 > a1 indicates the increasing-shrinkage ordering, and
a2 > b2 + 1 puts the expected strength increments above one.
"""

import argparse
import sys

from infactor.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20260818)
    ap.add_argument("--replicates", type=int, default=10)
    ap.add_argument("--designs", default="10x3,30x5")
    ap.add_argument("--out", default="out_mgp_table")
    args = ap.parse_args()
    return cli_main(
        [
            "bench",
            "--prior", "mgp",
            "--design", args.designs,
            "--replicates", str(args.replicates),
            "--seed", str(args.seed),
            "--out", args.out,
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
