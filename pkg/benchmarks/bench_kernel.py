"""Compare the compiled successor kernel with the pure-Python one.

Both kernels expand the same multiset configurations; the script checks
that they agree and reports the time per configuration.

    python benchmarks/bench_kernel.py [--processes 12] [--repeat 3]
"""

import argparse
import random
import sys
import time
from pathlib import Path

from waitonly import _kernel_py
from waitonly.oracle import Compiled, reachable_multisets
from waitonly.protocol import parse_protocol
from waitonly.reductions import gen_dfa_repcover_protocol, random_dfa_family

try:
    from waitonly import _kernel as _kernel_c
except ImportError:
    _kernel_c = None

SAMPLE = Path(__file__).resolve().parent.parent / "tests" / "data" / "sample.bp"


def workload(p, n):
    comp = Compiled(p)
    configs = sorted(comp.vector(m.as_dict()) for m in reachable_multisets(p, n))
    return comp, configs


def run(expand, comp, configs, rbn):
    total = 0
    for c in configs:
        total += len(expand(c, -1, comp.sends, comp.recv, rbn))
    return total


def bench(name, p, n, repeat):
    comp, configs = workload(p, n)
    rows = []
    for label, mod in (("python", _kernel_py), ("cython", _kernel_c)):
        if mod is None:
            rows.append((label, None, None))
            continue
        best = float("inf")
        for _ in range(repeat):
            t = time.perf_counter()
            succ = run(mod.expand, comp, configs, False)
            best = min(best, time.perf_counter() - t)
        rows.append((label, best, succ))
    counts = {s for _, _, s in rows if s is not None}
    if len(counts) > 1:
        sys.exit(f"{name}: kernels disagree on successor counts {counts}")
    py = rows[0][1]
    print(f"{name}: n={n}, {len(configs)} configurations")
    for label, best, succ in rows:
        if best is None:
            print(f"  {label:7s} not built")
            continue
        per = 1e6 * best / max(len(configs), 1)
        print(f"  {label:7s} {best:8.3f} s  {per:8.1f} us/config  x{py / best:5.1f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--processes", type=int, default=12)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    a = ap.parse_args()
    bench("sample", parse_protocol(SAMPLE.read_text()), a.processes, a.repeat)
    rng = random.Random(a.seed)
    fam = random_dfa_family(rng, max_automata=2, max_states=3, max_letters=2)
    p, _ = gen_dfa_repcover_protocol(fam)
    bench("dfa-repcover", p, min(a.processes, 6), a.repeat)


if __name__ == "__main__":
    main()
