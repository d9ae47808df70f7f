"""``extbdd-bench``: run a benchmark and print its result and statistics."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .. import manager
from ..errors import ExtBddError
from .picotrav import ORDERS, picotrav
from .queens import queens
from .tictactoe import tictactoe


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-prune", action="store_true", help="disable Apply shortcutting")
    p.add_argument("-M", "--memory", type=int, default=512, metavar="MiB",
                   help="memory budget in MiB (default 512, minimum 64)")
    p.add_argument("--temp", metavar="DIR", help="directory for temporary files")
    p.add_argument("--json", action="store_true", help="print statistics as one JSON object")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="extbdd-bench", description=__doc__)
    sub = ap.add_subparsers(dest="benchmark", required=True)
    q = sub.add_parser("queens", help="count N-Queens solutions")
    q.add_argument("-N", type=int, required=True)
    _common(q)
    t = sub.add_parser("tictactoe", help="count 4x4x4 Tic-Tac-Toe draws with N crosses")
    t.add_argument("-N", type=int, required=True)
    t.add_argument("--variables", type=int, default=76,
                   help="width of the exactly-N counter (default 76; 64 covers the cube only)")
    _common(t)
    pt = sub.add_parser("picotrav", help="check two BLIF netlists for equivalence")
    pt.add_argument("spec")
    pt.add_argument("impl")
    pt.add_argument("--order", choices=ORDERS, default="input")
    _common(pt)
    return ap


def run(args) -> dict:
    prune = not args.no_prune
    if args.benchmark == "queens":
        _, st = queens(args.N, prune=prune)
    elif args.benchmark == "tictactoe":
        _, st = tictactoe(args.N, prune=prune, variables=args.variables)
    else:
        res, st = picotrav(args.spec, args.impl, order=args.order)
        st.result = {"equal": res.equal, "outputs": res.outputs}
    return st.to_json()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        manager.init(memory_bytes=args.memory << 20, temp_dir=args.temp)
    except (ExtBddError, OSError) as e:
        print(f"extbdd-bench: {e}", file=sys.stderr)
        return 2
    try:
        out = run(args)
    except (ExtBddError, OSError) as e:
        print(f"extbdd-bench: {e}", file=sys.stderr)
        return 1
    finally:
        manager.deinit()
    if args.json:
        print(json.dumps(out))
    else:
        for k, v in out.items():
            print(f"{k:>18}: {v}")
    if args.benchmark == "picotrav":
        return 0 if out["result"]["equal"] else 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
