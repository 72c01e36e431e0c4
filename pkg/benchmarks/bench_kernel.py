"""Compiled kernel vs pure-Python engine on the four-core evaluation machine.

    python benchmarks/bench_kernel.py [--count 10000] [--repeat 3]

Prints one CSV row per (mode, backend) with the best wall time and the speedup.
Both backends must agree on every request record; the script exits non-zero
if they do not.
"""
import argparse
import sys
import time

from llcsim.config import paper_eval_config
from llcsim.kernel import BACKEND, simulate
from llcsim.workload import core_traces


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=10_000)
    ap.add_argument("--range", type=int, default=8192)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if BACKEND != "cython":
        print("compiled kernel not built; only the Python engine is available", file=sys.stderr)
        return 1
    print("mode,backend,seconds,llc_requests,speedup")
    status = 0
    for mode in ("ss", "nss", "p"):
        cfg = paper_eval_config(mode)
        traces = core_traces(cfg.num_cores, args.seed, args.range, args.count)
        t_py, rep_py = best_of(lambda: simulate(cfg, traces, backend="python"), 1)
        t_cy, rep_cy = best_of(lambda: simulate(cfg, traces, backend="cython"), args.repeat)
        if rep_py.records != rep_cy.records or rep_py.exec_slots != rep_cy.exec_slots:
            print(f"{mode}: backends disagree", file=sys.stderr)
            status = 2
        print(f"{mode},python,{t_py:.4f},{len(rep_py.records)},1.0")
        print(f"{mode},cython,{t_cy:.4f},{len(rep_cy.records)},{t_py / t_cy:.1f}")
    return status


if __name__ == "__main__":
    sys.exit(main())
