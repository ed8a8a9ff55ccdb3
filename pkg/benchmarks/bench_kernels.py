"""Compare the compiled and pure-Python canonicalization kernels.

Inputs are the exact ``canon_factors`` calls made while running a corpus
program, so the workload matches real use.  Also times the whole program
under each backend (end-to-end matching dominates there).

    python benchmarks/bench_kernels.py [corpus/deltaR2.frm] [--repeat N]
"""
import argparse
import os
import subprocess
import sys
import time

from formlet import _kernels as pure
from formlet import kernels
from formlet.exec import run_source

try:
    from formlet import _ckernels as compiled
except ImportError:
    compiled = None


def capture(path):
    """Run ``path`` once and record every canon_factors call."""
    calls = []
    orig = kernels.canon_factors

    def spy(cf, nf, symkind, base):
        calls.append((cf, nf, list(symkind), base))
        return orig(cf, nf, symkind, base)

    import formlet.term as term_mod

    term_mod.kernels.canon_factors = spy
    try:
        with open(path, encoding="utf-8") as fh:
            run_source(fh.read(), path, memoize=False)
    finally:
        term_mod.kernels.canon_factors = orig
    return calls


def bench(fn, calls, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        for c in calls:
            fn(*c)
        best = min(best, time.perf_counter() - t0)
    return best


def end_to_end(path, pure_backend):
    env = dict(os.environ)
    if pure_backend:
        env["FORMLET_PURE"] = "1"
    else:
        env.pop("FORMLET_PURE", None)
    t0 = time.perf_counter()
    subprocess.run([sys.executable, "-m", "formlet.cli", "run", path], env=env,
                   check=True, stdout=subprocess.DEVNULL)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("program", nargs="?", default="corpus/deltaR2.frm")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        sys.exit("compiled kernels not built; run: pip install -e . --no-build-isolation")
    calls = capture(args.program)
    mismatches = sum(1 for c in calls if pure.canon_factors(*c) != compiled.canon_factors(*c))
    tp = bench(pure.canon_factors, calls, args.repeat)
    tc = bench(compiled.canon_factors, calls, args.repeat)
    print(f"program: {args.program}")
    print(f"canon_factors calls: {len(calls)}  result mismatches: {mismatches}")
    print(f"  python  {tp * 1e3:9.1f} ms")
    print(f"  cython  {tc * 1e3:9.1f} ms   speedup x{tp / tc:.2f}")
    ep = end_to_end(args.program, True)
    ec = end_to_end(args.program, False)
    print("end-to-end run:")
    print(f"  python  {ep:7.2f} s")
    print(f"  cython  {ec:7.2f} s   speedup x{ep / ec:.2f}")


if __name__ == "__main__":
    main()
