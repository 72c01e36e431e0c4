"""Fast path for long LRU runs.

``simulate`` uses the compiled ``_kernel`` extension when it was built and
falls back to :class:`engine.Engine` otherwise.  Both produce the same
:class:`engine.SimReport` records; the kernel skips event logging, monitors
and scripted victims, so anything that needs those goes through the engine.
"""
from __future__ import annotations

import os

from .cache import AccessKind
from .config import Mode, SystemConfig
from .engine import Engine, RequestRecord, SimReport

try:  # pragma: no cover - depends on the build
    if os.environ.get("LLCSIM_PURE_PYTHON"):
        raise ImportError("pure Python requested")
    from ._kernel import run_kernel as _run_kernel
    BACKEND = "cython"
except ImportError:  # pragma: no cover
    _run_kernel = None
    BACKEND = "python"

_OPS = {AccessKind.READ: 0, AccessKind.WRITE: 1, AccessKind.IFETCH: 2}
_MODES = {Mode.PRIVATE: 0, Mode.BEST_EFFORT: 1, Mode.SEQUENCED: 2}


def _spec(config: SystemConfig, traces) -> dict:
    import numpy as np

    n = config.num_cores
    order = config.schedule.slot_order
    period = len(order)
    owned = []
    for c in range(n):
        for k in range(period):
            d = next(d for d in range(period) if order[(k + d) % period] == c)
            owned.append(d)
    parts = [config.partition_of(c) for c in range(n)]
    maxw = max(len(p.ways) for p in parts)
    pways = []
    for p in parts:
        pways += list(p.ways) + [0] * (maxw - len(p.ways))
    toff = [0]
    addrs, ops = [], []
    for tr in traces:
        for op, addr in tr:
            addrs.append(addr)
            ops.append(_OPS[op])
        toff.append(len(addrs))
    return {
        "N": n, "period": period, "order": list(order), "owned": owned,
        "pwb_capacity": config.pwb_capacity,
        "shift": config.line_size.bit_length() - 1,
        "private": [(g.num_sets, g.num_ways) for g in (config.l1i_geom, config.l1d_geom, config.l2_geom)],
        "llc_sets": config.llc_geom.num_sets, "llc_ways": config.llc_geom.num_ways,
        "evict_while_queued": config.ss_evict_while_queued,
        "pstart": [p.set_start for p in parts], "pcount": [p.set_count for p in parts],
        "pmode": [_MODES[p.mode] for p in parts], "pnw": [len(p.ways) for p in parts],
        "maxw": maxw, "pways": pways,
        "toff": np.asarray(toff, dtype=np.int64),
        "taddr": np.asarray(addrs, dtype=np.int64),
        "top": np.asarray(ops, dtype=np.uint8),
    }


def simulate(config: SystemConfig, traces, max_slots: int = 10**6, backend: str | None = None) -> SimReport:
    """Run ``traces`` to completion (or ``max_slots``) and return the report."""
    traces = [list(t) for t in traces]
    backend = backend or BACKEND
    if backend == "python" or _run_kernel is None:
        return Engine(config, traces).run(max_slots)
    out = _run_kernel(_spec(config, traces), max_slots)
    if out["error"]:
        # replay in Python to raise the precise diagnostic
        return Engine(config, traces).run(max_slots)
    records = [RequestRecord(*t) for t in zip(out["core"].tolist(), out["addr"].tolist(),
                                              out["entry"].tolist(), out["issue"].tolist(),
                                              out["done_slot"].tolist())]
    exec_slots = [int(f) + 1 for f in out["finish"]]
    done = [bool(d) for d in out["done"]]
    return SimReport(config, int(out["slots"]), records, exec_slots, done)
