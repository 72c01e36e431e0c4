"""Configuration sweeps: shorthand partition layouts × address ranges × seeds."""
from __future__ import annotations

import csv
import io
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .config import CacheGeometry, Mode, PartitionSpec, SystemConfig, one_slot_schedule
from .errors import ConfigError
from .kernel import simulate
from .workload import DEFAULT_COUNT, DEFAULT_WRITE_RATIO, core_traces

SWEEP_HEADER = ["config", "mode", "cores", "range_bytes", "seed", "llc_requests", "observed_wcl_cycles",
                "bound_cycles", "exec_time_cycles", "speedup_vs_p", "status", "error"]

_SHORT = re.compile(r"^\s*(SS|NSS|P)\s*\(\s*(\d+)\s*,\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)\s*$", re.I)


def parse_shorthand(text: str, cores: int | None = None, slot_width: int = 50,
                    line_size: int = 64) -> SystemConfig:
    """Build a machine from ``SS(s,w,n)``, ``NSS(s,w,n)`` or ``P(s,w)``.

    Shared forms put cores ``0..n-1`` in one partition of ``s`` sets and ``w``
    ways.  ``P(s,w)`` gives each of ``cores`` cores its own such partition.
    """
    m = _SHORT.match(text)
    if not m:
        raise ConfigError(f"bad configuration shorthand {text!r}; expected SS(s,w,n), NSS(s,w,n) or P(s,w)")
    kind, s, w, n = m.group(1).upper(), int(m.group(2)), int(m.group(3)), m.group(4)
    ways = tuple(range(w))
    if kind == "P":
        if n is not None:
            raise ConfigError(f"{text!r}: P takes (sets, ways)")
        if cores is None:
            raise ConfigError(f"{text!r}: the core count must be given for private partitions")
        parts = [PartitionSpec(c, c * s, s, ways, frozenset([c]), Mode.PRIVATE) for c in range(cores)]
        total_sets = s * cores
    else:
        if n is None:
            raise ConfigError(f"{text!r}: {kind} takes (sets, ways, sharers)")
        n = int(n)
        if cores is not None and cores != n:
            raise ConfigError(f"{text!r}: {n} sharers but {cores} cores")
        cores = n
        mode = Mode.SEQUENCED if kind == "SS" else Mode.BEST_EFFORT
        parts = [PartitionSpec(0, 0, s, ways, frozenset(range(n)), mode)]
        total_sets = s
    return SystemConfig(num_cores=cores, schedule=one_slot_schedule(cores), partitions=tuple(parts),
                        slot_width=slot_width, line_size=line_size,
                        l1i_geom=CacheGeometry(8, 2, line_size), l1d_geom=CacheGeometry(8, 2, line_size),
                        l2_geom=CacheGeometry(16, 4, line_size),
                        llc_geom=CacheGeometry(max(32, total_sets), max(16, w), line_size))


@dataclass(frozen=True)
class Cell:
    config: str
    cores: int
    range_bytes: int
    seed: int
    count: int
    write_ratio: float
    slot_width: int

    @property
    def key(self):
        return (self.config, self.range_bytes, self.seed)


def _run_cell(cell: Cell) -> dict:
    from .analysis import check_bound

    row = {"config": cell.config, "cores": cell.cores, "range_bytes": cell.range_bytes, "seed": cell.seed}
    try:
        cfg = parse_shorthand(cell.config, cell.cores, cell.slot_width)
        row["mode"] = cfg.partitions[0].mode.value
        traces = core_traces(cfg.num_cores, cell.seed, cell.range_bytes, cell.count, cell.write_ratio)
        rep = simulate(cfg, traces)
        verdict = check_bound(rep)
        row.update(llc_requests=len(rep.records), observed_wcl_cycles=rep.max_latency(),
                   bound_cycles=max(c.bound for c in verdict.cores) if verdict.cores else "",
                   exec_time_cycles=rep.total_exec_time(), status=verdict.status, error="")
    except Exception as exc:  # recorded per cell; the sweep goes on
        row.update(status="ERROR", error=f"{type(exc).__name__}: {exc}")
    return row


def load_sweep_spec(source) -> dict:
    from .config import tomli

    text = source
    if not isinstance(source, str) or ("\n" not in source and os.path.exists(source)):
        with open(source, "rb") as fh:
            text = fh.read().decode()
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed sweep document: {exc}") from None
    return doc


def cells_from_spec(doc: dict, default_seed: int = 0) -> list:
    configs = doc.get("configs", [])
    if not isinstance(configs, list):
        raise ConfigError("configs: expected a list of shorthand strings")
    cores = doc.get("cores")
    ranges = doc.get("ranges", [])
    seeds = doc.get("seeds", [default_seed])
    if isinstance(seeds, int):
        seeds = list(range(default_seed, default_seed + seeds))
    count = int(doc.get("count", DEFAULT_COUNT))
    ratio = float(doc.get("write_ratio", DEFAULT_WRITE_RATIO))
    sw = int(doc.get("slot_width", 50))
    return [Cell(c, cores if cores is not None else _infer_cores(c), r, s, count, ratio, sw)
            for c in configs for r in ranges for s in seeds]


def _infer_cores(text):
    m = _SHORT.match(text)
    if m and m.group(4):
        return int(m.group(4))
    raise ConfigError(f"{text!r}: set `cores` in the sweep document")


def run_sweep(cells, jobs: int = 1, baseline: str | None = None) -> list:
    cells = sorted(cells, key=lambda c: c.key)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_run_cell, cells))
    else:
        rows = [_run_cell(c) for c in cells]
    # speedup against the private layout on identical traces
    base = {}
    for r in rows:
        is_base = r["config"] == baseline if baseline else r.get("mode") == Mode.PRIVATE.value
        if is_base and r.get("status") not in ("ERROR", None):
            base[(r["cores"], r["range_bytes"], r["seed"])] = r["exec_time_cycles"]
    for r in rows:
        b = base.get((r["cores"], r["range_bytes"], r["seed"]))
        ex_t = r.get("exec_time_cycles")
        r["speedup_vs_p"] = f"{b / ex_t:.4f}" if b and ex_t else ""
    rows.sort(key=lambda r: (r["config"], r["range_bytes"], r["seed"]))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_HEADER, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in SWEEP_HEADER})
    return buf.getvalue()
