"""Queens with and without pruning: largest/median unreduced size and leaf-arc ratio.

    python3 scripts/table4.py -N 12 -M 512
"""
import argparse
import json

import extbdd
from extbdd.bench.queens import queens


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-N", type=int, default=12)
    ap.add_argument("-M", "--memory", type=int, default=512, help="budget in MiB")
    ap.add_argument("--temp", default=None)
    args = ap.parse_args()
    rows = []
    for prune in (False, True):
        extbdd.init(memory_bytes=args.memory << 20, temp_dir=args.temp)
        try:
            count, st = queens(args.N, prune=prune)
        finally:
            extbdd.deinit()
        rows.append(dict(st.to_json(), prune=prune, applies=st.applies))
    print(f"{'':10}{'count':>8}{'largest':>12}{'median':>10}{'leaf arcs':>11}{'time [s]':>10}")
    for r in rows:
        print(f"{'pruned' if r['prune'] else 'unpruned':10}{r['result']:>8}"
              f"{r['largest_unreduced']:>12}{r['median_unreduced']:>10.0f}"
              f"{100 * r['leaf_arc_ratio']:>10.1f}%{r['wall_ms'] / 1000:>10.1f}")
    print(json.dumps(rows))


if __name__ == "__main__":
    main()
