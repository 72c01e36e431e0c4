"""Slot-granular closed-loop simulation of the whole hierarchy.

One :class:`Engine` advances the bus one slot at a time.  Each core replays its
trace through its private caches; private hits cost nothing, and the first
private miss parks a request in the PRB.  The slot owner then sends either that
request or the head of its PWB to the LLC, and back-invalidations issued by the
LLC land in the sharers' PWBs at the end of the slot.

Latency of a request is counted in slots from the start of the first slot its
core owns at or after PRB entry, to the end of the slot that delivers the
response.  The wait from PRB entry to that first owned slot is kept separately
(``prb_wait``) because it depends only on where in the period the miss landed.
"""
from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional

from .bus import PendingBuffers, PendingRequest, TxKind, arbitrate, enqueue_writeback
from .cache import AccessKind, InvalidateResult, PrivateHierarchy
from .config import SystemConfig, distance, validate_one_slot
from .errors import ProtocolError, ScriptError
from .llc import LastLevelCache, RequestResult, WritebackResult

FREE = "free"


class TraceAccess(NamedTuple):
    op: AccessKind
    addr: int


class Event(NamedTuple):
    slot: int
    core: int
    kind: str
    addr: int
    set: int

    def format(self) -> str:
        return f"slot={self.slot} core={self.core} ev={self.kind} addr={self.addr:#x} set={self.set}"


class EventLog:
    """Append-only event record.

    With a ``sink`` (any text stream) records are written as they happen and,
    unless ``keep`` is set, not retained in memory.
    """

    def __init__(self, sink=None, keep: bool = True):
        self.sink = sink
        self.keep = keep or sink is None
        self.records = []
        self.snapshots = {}   # set index -> [(slot, holders per way)]

    def append(self, ev: Event):
        if self.keep:
            self.records.append(ev)
        if self.sink is not None:
            self.sink.write(ev.format() + "\n")

    def extend(self, evs):
        for ev in evs:
            self.append(ev)

    def to_text(self) -> str:
        buf = io.StringIO()
        for ev in self.records:
            buf.write(ev.format() + "\n")
        return buf.getvalue()

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


class RequestRecord(NamedTuple):
    core: int
    addr: int
    entry_slot: int
    issue_slot: int
    done_slot: int

    @property
    def latency_slots(self) -> int:
        return self.done_slot - self.issue_slot + 1

    @property
    def prb_wait(self) -> int:
        return self.issue_slot - self.entry_slot


@dataclass
class CoreAgent:
    core: int
    trace: list
    hier: PrivateHierarchy
    cursor: int = 0
    done: bool = False
    finish_slot: int = -1            # slot whose end completed the last access
    records: list = field(default_factory=list)

    @property
    def state(self) -> str:
        return "Done" if self.done else "Active"


@dataclass
class CoreSummary:
    core: int
    requests: int
    avg_latency_cycles: float
    max_latency_cycles: int
    exec_time_cycles: int
    done: bool


@dataclass
class SimReport:
    config: SystemConfig
    slots: int
    records: list
    exec_slots: list
    done: list
    events: Optional[EventLog] = None
    violations: list = field(default_factory=list)
    header: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return all(self.done)

    @property
    def incomplete_cores(self) -> list:
        return [c for c, d in enumerate(self.done) if not d]

    def latencies(self, core: Optional[int] = None) -> list:
        sw = self.config.slot_width
        return [r.latency_slots * sw for r in self.records if core is None or r.core == core]

    def max_latency(self, core: Optional[int] = None) -> int:
        lat = self.latencies(core)
        return max(lat) if lat else 0

    def exec_time(self, core: int) -> int:
        return self.exec_slots[core] * self.config.slot_width

    def total_exec_time(self) -> int:
        return max(self.exec_slots, default=0) * self.config.slot_width

    def summaries(self) -> list:
        out = []
        for c in range(self.config.num_cores):
            lat = self.latencies(c)
            out.append(CoreSummary(c, len(lat), sum(lat) / len(lat) if lat else 0.0,
                                   max(lat) if lat else 0, self.exec_time(c), self.done[c]))
        return out

    def summary_csv(self) -> str:
        lines = ["core,requests,avg_latency_cycles,max_latency_cycles,exec_time_cycles"]
        for s in self.summaries():
            lines.append(f"{s.core},{s.requests},{s.avg_latency_cycles:.2f},{s.max_latency_cycles},{s.exec_time_cycles}")
        return "\n".join(lines) + "\n"


class Engine:
    def __init__(self, config: SystemConfig, traces: Optional[Iterable] = None, *,
                 policy=None, events: Optional[EventLog] = None, debug: bool = False,
                 monitors: Iterable = (), track_sets: Iterable = ()):
        self.config = config
        self.slot = 0
        self.period = config.schedule.period_slots
        self.order = config.schedule.slot_order
        self.llc = LastLevelCache(config, policy)
        self.bufs = [PendingBuffers(c, config.pwb_capacity) for c in range(config.num_cores)]
        self.events = events
        self.debug = debug
        self.monitors = list(monitors)
        self.track_sets = list(track_sets)
        self.injections = {}
        self.tx_count = 0
        self.fifo_shadow = {}
        traces = list(traces) if traces is not None else [[] for _ in range(config.num_cores)]
        if len(traces) != config.num_cores:
            raise ValueError(f"need one trace per core ({config.num_cores}), got {len(traces)}")
        self.agents = []
        for c in range(config.num_cores):
            hier = PrivateHierarchy.build(c, config.l1i_geom, config.l1d_geom, config.l2_geom)
            self.agents.append(CoreAgent(c, [TraceAccess(*a) for a in traces[c]], hier))
        self.next_owned = [[self._scan_owned(c, k) for k in range(self.period)]
                           for c in range(config.num_cores)]
        self._started = False

    def _scan_owned(self, core, k):
        for d in range(self.period):
            if self.order[(k + d) % self.period] == core:
                return d
        return None

    def issue_slot(self, core: int, slot: int) -> int:
        d = self.next_owned[core][slot % self.period]
        if d is None:
            raise ProtocolError(f"core {core} owns no slot", core=core)
        return slot + d

    # -- scenario support ------------------------------------------------------

    def preload(self, core: int, addr: int, kind: AccessKind = AccessKind.READ):
        """Make ``core`` hold ``addr`` privately and in the LLC, with no bus traffic."""
        self.llc.install(core, addr)
        dropped = self.agents[core].hier.fill(kind, addr)
        if dropped:
            raise ScriptError(f"preloading {addr:#x} pushed {dropped[0][0]:#x} out of core {core}'s L2")

    def inject(self, slot: int, core: int, addr: int, kind: AccessKind = AccessKind.READ):
        """Have ``core`` place a request for ``addr`` in its PRB at the start of ``slot``."""
        self.injections.setdefault(slot, []).append((core, addr, kind))

    # -- stepping ------------------------------------------------------------------

    def _start(self):
        self._started = True
        for a in self.agents:
            self._advance(a, 0)

    def _advance(self, agent: CoreAgent, boundary: int):
        trace = agent.trace
        hier = agent.hier
        while agent.cursor < len(trace):
            op, addr = trace[agent.cursor]
            agent.cursor += 1
            if hier.access(op, addr):
                continue
            self.bufs[agent.core].put_request(
                PendingRequest(addr, op, boundary, self.issue_slot(agent.core, boundary)))
            return
        agent.done = True

    def _emit(self, evs, slot, core, kind, addr, set_idx):
        evs.append(Event(slot, core, kind, addr, set_idx))

    def step_slot(self) -> list:
        if not self._started:
            self._start()
        s = self.slot
        owner = self.order[s % self.period]
        for core, addr, kind in self.injections.pop(s, ()):
            if self.order[s % self.period] != core:
                raise ScriptError(f"slot {s} belongs to core {owner}, not core {core}")
            b = self.bufs[core]
            if b.prb is not None:
                raise ScriptError(f"slot {s}: core {core} already has an outstanding request")
            b.prb = PendingRequest(addr, kind, s, s)
        for name in self.track_sets:
            snaps = self.events.snapshots.setdefault(name, []) if self.events is not None else None
            if snaps is not None:
                p = self._partition_with_set(name)
                snaps.append((s, self.llc.holders(name, p.ways)))
        for m in self.monitors:
            m.before_slot(self, s, owner)

        try:
            evs, tx, completed = self._transact(s, owner)
        except ProtocolError as exc:
            if exc.slot is None:
                raise type(exc)(str(exc), slot=s, core=exc.core) from exc
            raise

        self.slot = s + 1
        if self.events is not None:
            self.events.extend(evs)
        for m in self.monitors:
            m.after_slot(self, s, owner, tx.kind if tx is not None else None, completed)
        if self.debug:
            self.check_invariants()
        return evs

    def _transact(self, s, owner):
        evs = []
        bufs = self.bufs[owner]
        tx = arbitrate(bufs, s)
        completed = None
        if tx is None:
            self._emit(evs, s, owner, "IDLE", 0, 0)
        elif tx.kind is TxKind.REQUEST:
            self.tx_count += 1
            req = bufs.prb
            out = self.llc.handle_request(owner, req.addr, s)
            if out.queued_now:
                self._emit(evs, s, owner, "QUEUE", req.addr, out.set)
                if self.debug:
                    self.fifo_shadow.setdefault(out.set, deque()).append(owner)
            r = out.result
            if r is RequestResult.EVICT:
                self._emit(evs, s, owner, "EVICT", out.victim, out.set)
                for sharer in out.backinv:
                    res = self.agents[sharer].hier.invalidate(out.victim)
                    enqueue_writeback(self.bufs[sharer], out.victim, res is InvalidateResult.WAS_DIRTY, s)
                    self._emit(evs, s, sharer, "BACKINV", out.victim, out.set)
            elif r is RequestResult.HIT or r is RequestResult.FILL:
                if out.victim is not None:
                    self._emit(evs, s, owner, "EVICT", out.victim, out.set)
                if out.granted:
                    self._emit(evs, s, owner, "GRANT", req.addr, out.set)
                    if self.debug:
                        q = self.fifo_shadow.get(out.set)
                        head = q.popleft() if q else None
                        if head != owner:
                            raise AssertionError(f"slot {s}: sequencer granted core {owner} ahead of core {head}")
                self._emit(evs, s, owner, r.value, req.addr, out.set)
                completed = req
            elif r is RequestResult.BLOCKED:
                self._emit(evs, s, owner, "BLOCK", req.addr, out.set)
            elif not out.queued_now:
                self._emit(evs, s, owner, "WAIT", req.addr, out.set)
        else:
            self.tx_count += 1
            addr, dirty = bufs.pwb.popleft()
            res, set_idx, _ = self.llc.handle_writeback(owner, addr, dirty, s)
            self._emit(evs, s, owner, "WB", addr, set_idx)

        if completed is not None:
            agent = self.agents[owner]
            for vaddr, vdirty in agent.hier.fill(completed.kind, completed.addr):
                if vdirty:
                    self.llc.absorb_dirty(owner, vaddr)
            agent.records.append(RequestRecord(owner, completed.addr, completed.entry_slot,
                                               completed.issue_slot, s))
            agent.finish_slot = s
            bufs.prb = None
            self._advance(agent, s + 1)
        return evs, tx, completed

    def _partition_with_set(self, set_idx):
        for p in self.config.partitions:
            if set_idx in p.set_range:
                return p
        raise ValueError(f"set {set_idx} belongs to no partition")

    def check_invariants(self):
        if self.tx_count > self.slot:
            raise AssertionError("more bus transactions than elapsed slots")
        self.llc.check_invariants([a.hier for a in self.agents])
        for a in self.agents:
            a.hier.check_local_inclusion()
        for b in self.bufs:
            if len(b.pwb) > b.capacity:
                raise AssertionError(f"core {b.core}: PWB above capacity")

    # -- driving -------------------------------------------------------------------

    def finished(self) -> bool:
        return self._started and all(a.done for a in self.agents)

    def quiescent(self) -> bool:
        return (self._started and not self.injections
                and all(b.prb is None and not b.pwb for b in self.bufs)
                and all(a.done for a in self.agents))

    def run(self, max_slots: int = 10**6, until: str = "finished") -> SimReport:
        """Step until ``until`` holds ("finished", "quiescent" or "horizon") or ``max_slots``."""
        if not self._started:
            self._start()
        stop = {"finished": self.finished, "quiescent": self.quiescent,
                "horizon": lambda: False}[until]
        while not stop() and self.slot < max_slots:
            self.step_slot()
        return self.report()

    def report(self) -> SimReport:
        records = [r for a in self.agents for r in a.records]
        records.sort(key=lambda r: (r.done_slot, r.core))
        exec_slots = [a.finish_slot + 1 for a in self.agents]
        done = [a.done and self.bufs[a.core].prb is None for a in self.agents]
        violations = [v for m in self.monitors for v in m.violations]
        return SimReport(self.config, self.slot, records, exec_slots, done, self.events, violations)


def run(config: SystemConfig, traces, max_slots: int = 10**6, **kw) -> SimReport:
    return Engine(config, traces, **kw).run(max_slots)


def measure_distances(log: EventLog, set_idx: int, cua: int, schedule) -> list:
    """Distance of each way's holder to ``cua``, sampled at the start of ``cua``'s slots.

    Returns one list per way of ``(slot, distance)``; a free way reads :data:`FREE`.
    Requires the engine to have tracked ``set_idx`` and a one-slot schedule.
    """
    n = schedule.period_slots
    if not validate_one_slot(schedule, n):
        raise ValueError("distances need a one-slot schedule")
    snaps = log.snapshots.get(set_idx, [])
    series = None
    for slot, holders in snaps:
        if schedule.owner(slot) != cua:
            continue
        if series is None:
            series = [[] for _ in holders]
        for w, h in enumerate(holders):
            series[w].append((slot, FREE if h is None else distance(schedule, h, cua)))
    return series or []


def collapse(series) -> list:
    """Drop consecutive repeats from a ``[(slot, value)]`` series, keeping values only."""
    out = []
    for _, v in series:
        if not out or out[-1] != v:
            out.append(v)
    return out
