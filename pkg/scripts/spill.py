"""Queens under a small budget, reporting how much went through temp files.

    python3 scripts/spill.py -N 11 -M 64 --block 4096
"""
import argparse

import extbdd
from extbdd.bench.queens import queens


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("-N", type=int, default=11)
    ap.add_argument("-M", "--memory", type=int, default=64)
    ap.add_argument("--block", type=int, default=None, help="block size in bytes")
    args = ap.parse_args()
    kw = {"block_bytes": args.block} if args.block else {}
    m = extbdd.init(memory_bytes=args.memory << 20, **kw)
    try:
        count, st = queens(args.N)
        io = m.store.io
        print(f"count={count} time={st.wall_ms / 1000:.1f}s")
        print(f"written={io.bytes_written >> 20} MiB read={io.bytes_read >> 20} MiB")
        print(f"queue runs spilled={m.store.spills} ({m.store.spill_bytes >> 20} MiB), "
              f"at most {m.store.peak_spill_files} on disk at once")
        print(f"peak queue memory={m.peak_pq_bytes} of {m.pq_bytes} bytes")
    finally:
        extbdd.deinit()


if __name__ == "__main__":
    main()
