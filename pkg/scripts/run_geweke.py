#!/usr/bin/env python3
"""Joint-distribution self-checks for every transition kernel.

For each adapter, draws from the prior-plus-likelihood joint two ways —
forward simulation versus the successive-conditional chain — and compares
first and second moments of a battery of statistics.  All |z| < 4 at 1e5
draws is the passing bar; a broken conditional typically shows |z| in the
tens.  Prints one table per adapter.

The five adapters: the shared core steps in isolation, the
multiplicative-gamma kernel with shapes fixed and with shapes sampled, the
cumulative-shrinkage kernel at fixed truncation, and the buffet-process
kernel in fixed-pool mode.
"""

import argparse
import sys
import time

from infactor.geweke import run_comparison, standard_adapters
from infactor.rng import RngStream


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=424242)
    ap.add_argument(
        "--only", help="comma-separated adapter names (default: all five)"
    )
    args = ap.parse_args()

    adapters = standard_adapters()
    if args.only:
        wanted = set(args.only.split(","))
        known = {a.name for a in adapters}
        missing = wanted - known
        if missing:
            print(f"error: unknown adapters {sorted(missing)}; have {sorted(known)}",
                  file=sys.stderr)
            return 1
        adapters = [a for a in adapters if a.name in wanted]

    worst_overall, failed = 0.0, []
    for adapter in adapters:
        t0 = time.perf_counter()
        comp = run_comparison(adapter, args.samples, RngStream(args.seed, (7,)))
        wall = time.perf_counter() - t0
        print(comp.table())
        print(f"max |z| = {comp.max_abs_z:.2f}   ({wall:.0f}s)\n")
        worst_overall = max(worst_overall, comp.max_abs_z)
        if not comp.passed(4.0):
            failed.append(adapter.name)

    if failed:
        print(f"FAIL: {', '.join(failed)} exceeded |z| = 4", file=sys.stderr)
        return 1
    print(f"all adapters pass: worst |z| = {worst_overall:.2f} < 4")
    return 0


if __name__ == "__main__":
    sys.exit(main())
