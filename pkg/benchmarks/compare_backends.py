"""Time every primitive on the native and pure-Python backends side by side.

    python3 benchmarks/compare_backends.py [--samples N] [--seed S]

The pure-Python backend is slow, so the default sample count is small;
use ``pployalty bench`` for the full report with the cost model.
"""

import argparse
import random

from pployalty import _backend, bench, crypto_core


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    results = {}
    for name in ("native", "python"):
        try:
            be = _backend.load(name)
        except ImportError as exc:
            print(f"{name}: unavailable ({exc})")
            continue
        params = crypto_core.setup(backend=be)
        results[name] = bench.measure_rows(params, args.samples, warmup=1, rng=random.Random(args.seed))

    if not results:
        return 1
    names = list(results)
    head = f"{'operation (median ms)':<34}" + "".join(f"{n:>12}" for n in names)
    if len(names) == 2:
        head += f"{'speedup':>10}"
    print(head)
    print("-" * len(head))
    for row in bench.ROWS:
        meds = [results[n][row].median_ms for n in names]
        line = f"{row:<34}" + "".join(f"{m:>12.4f}" for m in meds)
        if len(meds) == 2 and meds[0] > 0:
            line += f"{meds[1] / meds[0]:>9.1f}x"
        print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
