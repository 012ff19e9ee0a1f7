"""Compiled NTT core vs the numpy fallback.

    python benchmarks/bench_ntt.py [--sizes 1024,4096,16384] [--limbs 4] [--repeats 5] [--json]

Both implementations run on identical random inputs; outputs are checked for
equality before anything is timed.
"""
import argparse
import json
import sys
import time

import numpy as np

from helix.ckks import ntt
from helix.params import ntt_primes


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(N, limbs, repeats, seed=0):
    moduli = ntt_primes(N, 30, limbs)
    rng = np.random.default_rng(seed)
    a = np.stack([rng.integers(0, q, N) for q in moduli]).astype(np.int64)
    ntt.stacked_tables(tuple(moduli), N)  # build tables outside the timed region
    row = {"N": N, "limbs": limbs}
    ref = ntt.forward(a, moduli, impl="numpy")
    if ntt.IMPLEMENTATION == "compiled":
        if not np.array_equal(ntt.forward(a, moduli, impl="compiled"), ref):
            raise AssertionError(f"compiled and numpy forward NTT differ at N={N}")
    for impl in ("numpy", "compiled"):
        if impl == "compiled" and ntt.IMPLEMENTATION != "compiled":
            row[f"{impl}_fwd_ms"] = row[f"{impl}_inv_ms"] = None
            continue
        row[f"{impl}_fwd_ms"] = 1e3 * best_of(lambda: ntt.forward(a, moduli, impl=impl), repeats)
        row[f"{impl}_inv_ms"] = 1e3 * best_of(lambda: ntt.inverse(ref, moduli, impl=impl), repeats)
    if row["compiled_fwd_ms"]:
        row["speedup_fwd"] = row["numpy_fwd_ms"] / row["compiled_fwd_ms"]
        row["speedup_inv"] = row["numpy_inv_ms"] / row["compiled_inv_ms"]
    return row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1024,4096,16384")
    ap.add_argument("--limbs", type=int, default=4)
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)
    rows = [bench(int(s), args.limbs, args.repeats) for s in args.sizes.split(",")]
    if args.json:
        print(json.dumps({"implementation": ntt.IMPLEMENTATION, "rows": rows}, indent=2))
        return 0
    print(f"active implementation: {ntt.IMPLEMENTATION}")
    print(f"{'N':>7} {'limbs':>5} {'numpy fwd':>10} {'core fwd':>10} {'numpy inv':>10} {'core inv':>10} {'speedup':>8}")
    for r in rows:
        core_f = f"{r['compiled_fwd_ms']:10.3f}" if r["compiled_fwd_ms"] else f"{'n/a':>10}"
        core_i = f"{r['compiled_inv_ms']:10.3f}" if r["compiled_inv_ms"] else f"{'n/a':>10}"
        sp = f"{r['speedup_fwd']:7.1f}x" if "speedup_fwd" in r else f"{'n/a':>8}"
        print(f"{r['N']:>7} {r['limbs']:>5} {r['numpy_fwd_ms']:10.3f} {core_f} {r['numpy_inv_ms']:10.3f} {core_i} {sp}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
