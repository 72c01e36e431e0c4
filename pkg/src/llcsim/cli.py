"""``llcsim`` command line: bound, gen, simulate, scenario, sweep.

Exit codes: 0 ok/PASS, 1 usage, 2 protocol error, 3 bound violation,
4 incomplete at the horizon.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from . import __version__
from .analysis import BoundInputs, bound_slots, check_bound
from .config import Mode, load_config, paper_eval_config
from .errors import ConfigError, LlcSimError, ProtocolError, ScriptError
from .workload import DEFAULT_COUNT, DEFAULT_WRITE_RATIO, RNG_NAME

EXIT_OK, EXIT_USAGE, EXIT_PROTOCOL, EXIT_VIOLATION, EXIT_INCOMPLETE = 0, 1, 2, 3, 4
BOUND_HEADER = "mode,N,n,w,M,m_cua,SW,wcl_cycles,wcl_slots"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get("LLCSIM_SEED", "0")
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"LLCSIM_SEED must be an integer, got {raw!r}") from None


def _int(text):
    return int(text, 0)


# ---------------------------------------------------------------- bound

def cmd_bound(args) -> int:
    mode = Mode.parse(args.mode)
    n = args.n if args.n is not None else (1 if mode is Mode.PRIVATE else args.N)
    if mode is Mode.PRIVATE and n != 1:
        raise UsageError("--n must be 1 for private partitions")
    try:
        b = BoundInputs(args.N, n, args.w, args.M, args.mcua, args.sw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    slots = bound_slots(mode, b.N, b.n, b.w, b.M, b.m_cua)
    if not args.no_header:
        print(BOUND_HEADER)
    print(f"{mode.value},{b.N},{b.n},{b.w},{b.M},{b.m_cua},{b.SW},{slots * b.SW},{slots}")
    return EXIT_OK


# ---------------------------------------------------------------- gen

def cmd_gen(args) -> int:
    from .workload import core_traces, disjoint_ranges, generate_trace, save_trace

    seed = args.seed if args.seed is not None else _default_seed()
    try:
        if args.cores:
            out = Path(args.output or ".")
            out.mkdir(parents=True, exist_ok=True)
            traces = core_traces(args.cores, seed, args.range, args.count, args.write_ratio, args.stride)
            bases = disjoint_ranges(args.cores, args.range, args.stride or max(args.range, 1 << 20))
            for c, (tr, base) in enumerate(zip(traces, bases)):
                save_trace(tr, out / f"core{c}.trace", _gen_header(seed, base, args))
            return EXIT_OK
        tr = generate_trace(seed, args.base, args.range, args.count, args.write_ratio)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.output:
        save_trace(tr, args.output, _gen_header(seed, args.base, args))
    else:
        from .workload import write_trace
        write_trace(tr, sys.stdout, _gen_header(seed, args.base, args))
    return EXIT_OK


def _gen_header(seed, base, args):
    return (f"llcsim {__version__} rng={RNG_NAME} seed={seed} base={base:#x} range={args.range} "
            f"count={args.count} write_ratio={args.write_ratio}")


# ---------------------------------------------------------------- simulate

def _build_config(args):
    given = [x for x in (args.config, args.preset, args.shorthand) if x]
    if len(given) != 1:
        raise UsageError("give exactly one of --config, --preset, --shorthand")
    try:
        if args.config:
            if not Path(args.config).is_file():
                raise UsageError(f"config file not found: {args.config}")
            cfg = load_config(args.config)
        elif args.preset:
            if not args.mode:
                raise UsageError("--preset needs --mode")
            cfg = paper_eval_config(args.mode, args.cores or 4, args.sw or 50)
        else:
            from .sweep import parse_shorthand
            cfg = parse_shorthand(args.shorthand, args.cores, args.sw or 50)
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _load_traces(args, cfg):
    from .workload import core_traces, load_trace

    if args.trace and args.range:
        raise UsageError("--trace and --range are mutually exclusive")
    if args.trace:
        if len(args.trace) != cfg.num_cores:
            raise UsageError(f"{cfg.num_cores} cores need {cfg.num_cores} --trace files, got {len(args.trace)}")
        traces = []
        for p in args.trace:
            if not Path(p).is_file():
                raise UsageError(f"trace file not found: {p}")
            try:
                traces.append(load_trace(p, cfg.line_size))
            except ValueError as exc:
                raise UsageError(f"{p}: {exc}") from None
        return traces, [f"traces={','.join(args.trace)}"]
    if not args.range:
        raise UsageError("give --trace files or --range to generate traces")
    seed = args.seed if args.seed is not None else _default_seed()
    traces = core_traces(cfg.num_cores, seed, args.range, args.count, args.write_ratio)
    return traces, [f"rng={RNG_NAME}", f"seed={seed}", f"range={args.range}", f"count={args.count}",
                    f"write_ratio={args.write_ratio}"]


def cmd_simulate(args) -> int:
    from .engine import Engine, EventLog
    from .kernel import BACKEND, simulate
    from .monitors import default_monitors

    cfg = _build_config(args)
    traces, provenance = _load_traces(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    max_slots = args.max_slots
    if not cfg.is_one_slot:
        max_slots = min(max_slots, args.horizon_periods * cfg.schedule.period_slots)
    log = None
    try:
        if args.emit_events or args.debug or args.monitors:
            log = EventLog(keep=args.emit_events)
            eng = Engine(cfg, traces, events=log, debug=args.debug,
                         monitors=default_monitors(cfg) if args.monitors else ())
            rep = eng.run(max_slots)
            backend = "python"
        else:
            rep = simulate(cfg, traces, max_slots)
            backend = BACKEND
    except ProtocolError as exc:
        (out / "verdict.txt").write_text(f"PROTOCOL-ERROR: {exc}\n")
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    periods = rep.slots // cfg.schedule.period_slots
    verdict = check_bound(rep, horizon_periods=periods)
    header = [f"llcsim {__version__}", f"backend={backend}", f"slots={rep.slots}",
              f"slot_width={cfg.slot_width}"] + provenance
    with open(out / "report.csv", "w") as fh:
        for h in header:
            fh.write(f"# {h}\n")
        fh.write(rep.summary_csv())
    if args.emit_events and log is not None:
        (out / "events.log").write_text(log.to_text())
    text = verdict.to_text()
    if rep.violations:
        text += "".join(f"monitor {v.monitor}: core {v.core} slot {v.slot} {v.detail}\n" for v in rep.violations)
    (out / "verdict.txt").write_text(text)
    sys.stdout.write(text)
    if verdict.status == "FAIL" or rep.violations:
        return EXIT_VIOLATION
    if verdict.status == "INCOMPLETE":
        return EXIT_INCOMPLETE
    return EXIT_OK


# ---------------------------------------------------------------- scenario

def cmd_scenario(args) -> int:
    from .scenarios import build, golden_diff, replay_scenario

    try:
        script = build(args.name)
    except ScriptError as exc:
        raise UsageError(str(exc)) from None
    res = replay_scenario(script)
    text = res.log.to_text()
    if not args.quiet:
        sys.stdout.write(text)
    series = res.tracked_series()
    if series:
        print("distance series (set {}, way {}): {}".format(
            script.track_set, script.track_way, ",".join(str(x) for x in series)))
    if res.cua_pending():
        periods = res.report.slots // script.config.schedule.period_slots
        print(f"core {script.cua}: INCOMPLETE after {periods} periods")
    else:
        print(f"core {script.cua}: completed in {res.cua_latency_slots} slots (done at slot {res.cua_done_slot})")
    diff = golden_diff(args.name, text)
    if diff:
        sys.stdout.write("golden mismatch:\n" + "".join(diff))
        return EXIT_VIOLATION
    print("golden: match")
    return EXIT_OK


# ---------------------------------------------------------------- sweep

def cmd_sweep(args) -> int:
    from .sweep import cells_from_spec, load_sweep_spec, rows_to_csv, run_sweep

    if not Path(args.spec).is_file():
        raise UsageError(f"sweep document not found: {args.spec}")
    try:
        doc = load_sweep_spec(args.spec)
        cells = cells_from_spec(doc, args.seed if args.seed is not None else _default_seed())
    except ConfigError as exc:
        raise UsageError(str(exc)) from None
    rows = run_sweep(cells, jobs=args.jobs, baseline=doc.get("baseline"))
    text = rows_to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="llcsim", description="Slot-accurate shared-LLC simulator and latency-bound calculator.")
    p.add_argument("--version", action="version", version=f"llcsim {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    b = sub.add_parser("bound", help="closed-form worst-case latency for one request")
    b.add_argument("--mode", required=True, choices=["ss", "nss", "p", "SS", "NSS", "P"])
    b.add_argument("--N", type=int, required=True, help="cores on the bus")
    b.add_argument("--n", type=int, help="sharers of the partition (default: N, or 1 for p)")
    b.add_argument("--w", type=int, default=1, help="ways of the partition")
    b.add_argument("--M", type=int, default=0, help="partition capacity in lines")
    b.add_argument("--mcua", type=int, default=0, help="private capacity of the analysed core in lines")
    b.add_argument("--sw", type=int, default=50, help="slot width in cycles")
    b.add_argument("--no-header", action="store_true")
    b.set_defaults(func=cmd_bound)

    g = sub.add_parser("gen", help="generate seeded random traces")
    g.add_argument("--seed", type=_int, help="default: $LLCSIM_SEED or 0")
    g.add_argument("--base", type=_int, default=0)
    g.add_argument("--range", type=_int, required=True, help="address range in bytes")
    g.add_argument("--count", type=int, default=DEFAULT_COUNT)
    g.add_argument("--write-ratio", type=float, default=DEFAULT_WRITE_RATIO)
    g.add_argument("--cores", type=int, help="write one trace per core into the --output directory")
    g.add_argument("--stride", type=_int, help="spacing of per-core bases")
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("simulate", help="run traces and check the bound")
    s.add_argument("--config", help="TOML machine description")
    s.add_argument("--preset", choices=["paper-eval"], help="4-core evaluation machine with one-set partitions")
    s.add_argument("--shorthand", help="SS(s,w,n), NSS(s,w,n) or P(s,w)")
    s.add_argument("--mode", help="mode for --preset")
    s.add_argument("--cores", type=int)
    s.add_argument("--sw", type=int)
    s.add_argument("--trace", action="append", help="trace file, one per core in core order")
    s.add_argument("--range", type=_int, help="generate traces over this many bytes per core")
    s.add_argument("--seed", type=_int)
    s.add_argument("--count", type=int, default=DEFAULT_COUNT)
    s.add_argument("--write-ratio", type=float, default=DEFAULT_WRITE_RATIO)
    s.add_argument("--out", default=".", help="output directory")
    s.add_argument("--emit-events", action="store_true", help="also write events.log")
    s.add_argument("--max-slots", type=int, default=10**6)
    s.add_argument("--horizon-periods", type=int, default=100,
                   help="give up after this many periods on schedules without a bound")
    s.add_argument("--debug", action="store_true", help="check invariants at every slot boundary")
    s.add_argument("--monitors", action="store_true", help="run the distance and victim-drain monitors")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("scenario", help="replay a scripted scenario against its golden log")
    c.add_argument("name")
    c.add_argument("--quiet", action="store_true", help="skip the event log")
    c.set_defaults(func=cmd_scenario)

    w = sub.add_parser("sweep", help="run configurations x ranges x seeds, CSV out")
    w.add_argument("spec", help="TOML sweep document")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--seed", type=_int, help="first seed when `seeds` is a count")
    w.add_argument("-o", "--out")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"llcsim {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (ConfigError, ValueError) as exc:
        print(f"llcsim {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LlcSimError as exc:
        print(f"llcsim {args.command}: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
