"""One check per acceptance criterion; each prints a single PASS/FAIL line."""
import dataclasses
import time

import pytest

from conftest import ACCEPTANCE_LINES
from fuzzing import random_machine

from llcsim.analysis import bound_slots, check_bound
from llcsim.cli import main
from llcsim.config import paper_eval_config
from llcsim.engine import Engine
from llcsim.kernel import simulate
from llcsim.monitors import default_monitors
from llcsim.oracle import brute_force_wcl, micro_configs
from llcsim.scenarios import build, golden_diff, replay_scenario
from llcsim.sweep import Cell, run_sweep
from llcsim.workload import DEFAULT_RANGES, core_traces

SEEDS = range(20)
FUZZ_RUNS = 1000


def report(n, ok, detail):
    line = f"ACCEPTANCE {n} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def test_1_bound_reproduction(capsys):
    want = {"nss": 979250, "ss": 5000, "p": 450}
    got = {}
    for mode in want:
        main(["bound", "--mode", mode, "--N", "4", "--n", "4" if mode != "p" else "1", "--w", "16",
              "--M", "16", "--mcua", "64", "--sw", "50", "--no-header"])
        got[mode] = int(capsys.readouterr().out.strip().split(",")[-2])
    ok = got == want
    with capsys.disabled():
        report(1, ok, f"bound cycles {got} (want {want}, exact)")
    assert ok


def test_2_bound_soundness_by_simulation(capsys):
    t0 = time.time()
    violations = 0
    worst = {}
    per_seed_ss_le_nss = total = 0
    for rng in DEFAULT_RANGES:
        for seed in SEEDS:
            traces = core_traces(4, seed, rng, 10_000)
            obs = {}
            for mode in ("ss", "nss", "p"):
                rep = simulate(paper_eval_config(mode), traces)
                v = check_bound(rep)
                violations += v.status != "PASS"
                obs[mode] = rep.max_latency()
                worst[(mode, rng)] = max(worst.get((mode, rng), 0), obs[mode])
            total += 1
            per_seed_ss_le_nss += obs["ss"] <= obs["nss"]
    order_ok = all(worst[("ss", r)] <= worst[("nss", r)] for r in DEFAULT_RANGES)
    ok = violations == 0 and order_ok
    summary = ", ".join(f"{r}B ss={worst[('ss', r)]} nss={worst[('nss', r)]} p={worst[('p', r)]}"
                        for r in DEFAULT_RANGES)
    with capsys.disabled():
        report(2, ok, f"{violations} bound violations over {3 * total} runs; max observed WCL per range: "
                      f"{summary}; ss<=nss in {per_seed_ss_le_nss}/{total} seeds ({time.time() - t0:.0f}s)")
    assert violations == 0
    assert order_ok


def test_3_oracle_certification(capsys):
    t0 = time.time()
    bad, count = [], 0
    cfgs = list(micro_configs(3, 2, 2))
    # sequenced partitions also without evictions by queued non-head cores
    cfgs += [dataclasses.replace(c, evict_while_queued=False) for c in cfgs if c.mode == "ss"]
    for cfg in cfgs:
        r = brute_force_wcl(cfg, horizon=40)
        count += 1
        b = bound_slots(cfg.mode, cfg.N, cfg.n, cfg.w, cfg.w, cfg.m)
        if not r.certified or r.overflow or r.max_latency > b:
            bad.append((cfg, r.max_latency, b))
    ok = not bad
    with capsys.disabled():
        report(3, ok, f"{len(bad)} counterexamples over {count} micro-configs ({time.time() - t0:.1f}s)")
    assert ok, bad[:3]


def test_4_scenario_goldens(capsys):
    f2 = replay_scenario(build("fig2"))
    f3 = replay_scenario(build("fig3"))
    f4 = replay_scenario(build("fig4"))
    periods = f2.report.slots // f2.script.config.schedule.period_slots
    checks = {
        "fig2 incomplete after 100 periods": f2.cua_pending() and periods == 100,
        "fig3 done in cua's 4th slot": f3.cua_done_slot == 3 * 4,
        "fig3 series 2,1,free": f3.tracked_series() == [2, 1, "free"],
        "fig4 series rises 1->3": f4.tracked_series() == [1, "free", 3],
    }
    for name, res in (("fig2", f2), ("fig3", f3), ("fig4", f4)):
        checks[f"{name} golden log"] = golden_diff(name, res.log.to_text()) == []
    failed = [k for k, v in checks.items() if not v]
    with capsys.disabled():
        report(4, not failed, f"{len(checks) - len(failed)}/{len(checks)} checks" +
               (f"; failed: {failed}" if failed else ""))
    assert not failed


def test_5_distance_monitors(capsys):
    t0 = time.time()
    viol, samples = [], 0
    for seed in range(FUZZ_RUNS):
        cfg, traces = random_machine(seed, sets=1)
        mons = default_monitors(cfg)
        rep = Engine(cfg, traces, monitors=mons, debug=True).run(10**5)
        samples += sum(m.samples for m in mons)
        viol += [(seed, v) for v in rep.violations]
    ok = not viol
    with capsys.disabled():
        report(5, ok, f"{len(viol)} monitor violations over {FUZZ_RUNS} fuzzed one-slot runs, "
                      f"{samples} samples ({time.time() - t0:.0f}s)")
    assert ok, viol[:3]


def test_6_sharing_benefit(capsys):
    # 2 cores, 4096 B in total: SS/NSS share 4 sets x 16 ways, P gives each core 2 sets (2048 B)
    per_core_private = 2048
    cells = [Cell(c, 2, r, s, 10_000, 0.5, 50) for c in ("SS(4,16,2)", "NSS(4,16,2)", "P(2,16)")
             for r in DEFAULT_RANGES for s in range(5)]
    rows = run_sweep(cells)
    assert all(r["status"] == "PASS" for r in rows)
    ex = {(r["config"][:r["config"].index("(")], r["range_bytes"], r["seed"]): r["exec_time_cycles"] for r in rows}
    equal = all(ex[("SS", r, s)] == ex[("NSS", r, s)] == ex[("P", r, s)]
                for r in DEFAULT_RANGES if r <= per_core_private for s in range(5))
    speed = {r: [ex[("P", r, s)] / ex[("SS", r, s)] for s in range(5)]
             for r in DEFAULT_RANGES if r > per_core_private}
    direction = all(x >= 1.0 for v in speed.values() for x in v)
    ok = equal and direction
    detail = ", ".join(f"{r}B {min(v):.3f}-{max(v):.3f}" for r, v in speed.items())
    with capsys.disabled():
        report(6, ok, f"equal exec time when range fits: {equal}; SS speedup vs P when it does not: {detail}")
    assert equal
    assert direction, f"SS slower than P: {speed}"


def test_7_invariants(capsys):
    # debug mode asserts inclusion, isolation, one transaction per slot and
    # sequencer FIFO order after every slot; any breach raises
    runs = 0
    for mode in ("ss", "nss", "p"):
        for seed in range(3):
            Engine(paper_eval_config(mode), core_traces(4, seed, 8192, 1000), debug=True).run()
            runs += 1
    for seed in range(300):
        cfg, traces = random_machine(10_000 + seed)
        Engine(cfg, traces, debug=True).run(10**5)
        runs += 1
    for name in ("fig2", "fig2_1s", "fig3", "fig3_ss", "fig4"):
        replay_scenario(build(name), debug=True)
        runs += 1
    with capsys.disabled():
        report(7, True, f"0 invariant violations over {runs} debug-mode runs")
