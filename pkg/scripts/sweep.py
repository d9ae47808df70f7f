"""Run a benchmark over a range of N and print one CSV row per run.

    python3 scripts/sweep.py queens 4 11
    python3 scripts/sweep.py tictactoe 0 5 --no-prune
"""
import argparse
import csv
import sys

import extbdd
from extbdd.bench.queens import queens
from extbdd.bench.tictactoe import tictactoe

BENCH = {"queens": queens, "tictactoe": tictactoe}
FIELDS = ["benchmark", "n", "prune", "result", "applies", "largest_unreduced",
          "median_unreduced", "leaf_arc_ratio", "wall_ms"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("benchmark", choices=sorted(BENCH))
    ap.add_argument("lo", type=int)
    ap.add_argument("hi", type=int)
    ap.add_argument("--no-prune", action="store_true")
    ap.add_argument("-M", "--memory", type=int, default=512)
    args = ap.parse_args()
    out = csv.DictWriter(sys.stdout, FIELDS, extrasaction="ignore")
    out.writeheader()
    for n in range(args.lo, args.hi + 1):
        extbdd.init(memory_bytes=args.memory << 20)
        try:
            _, st = BENCH[args.benchmark](n, prune=not args.no_prune)
        finally:
            extbdd.deinit()
        row = vars(st) | {"prune": not args.no_prune, "n": n}
        out.writerow(row)
        sys.stdout.flush()


if __name__ == "__main__":
    main()
