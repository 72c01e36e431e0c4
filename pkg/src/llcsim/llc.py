"""The partitioned, inclusive last-level cache and its set sequencer."""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .cache import Candidate, LRUPolicy, ReplacementPolicy, set_index
from .config import Mode, PartitionSpec, SystemConfig
from .errors import IsolationError, ProtocolError


@dataclass
class LlcLineMeta:
    line: int
    sharers: set
    stamp: int = 0
    dirty: bool = False
    evicting: bool = False
    evict_for: Optional[int] = None   # requester waiting on this eviction; None once orphaned


class RequestResult(enum.Enum):
    HIT = "HIT"
    FILL = "FILL"
    EVICT = "EVICT"
    QUEUED = "QUEUE"
    BLOCKED = "BLOCK"
    WAIT = "WAIT"


@dataclass
class RequestOutcome:
    result: RequestResult
    set: int
    way: Optional[int] = None
    victim: Optional[int] = None          # byte address of an evicted line
    backinv: tuple = ()                   # cores that must drop the victim
    queued_now: bool = False              # joined the sequencer queue in this slot
    granted: bool = False                 # filled as sequencer head

    @property
    def completes(self) -> bool:
        return self.result in (RequestResult.HIT, RequestResult.FILL)


class WritebackResult(enum.Enum):
    FREED = "FREED"
    MERGED = "MERGED"


class SetSequencer:
    """Queue lookup table (set -> queue id) plus the pool of per-set FIFO queues.

    A set has a table entry exactly while it has at least one pending request.
    """

    def __init__(self, pool_size: int):
        self.qlt = {}
        self.sqs = {}
        self.free_ids = deque(range(pool_size))
        self.members = {}

    def enqueue(self, set_idx: int, core: int):
        if core in self.members:
            raise ProtocolError(f"core {core} is already queued on set {self.members[core]}", core=core)
        qid = self.qlt.get(set_idx)
        if qid is None:
            if not self.free_ids:
                raise ProtocolError("set sequencer queue pool exhausted")
            qid = self.free_ids.popleft()
            self.qlt[set_idx] = qid
            self.sqs[qid] = deque()
        self.sqs[qid].append(core)
        self.members[core] = set_idx

    def queue(self, set_idx: int) -> tuple:
        qid = self.qlt.get(set_idx)
        return tuple(self.sqs[qid]) if qid is not None else ()

    def head(self, set_idx: int) -> Optional[int]:
        qid = self.qlt.get(set_idx)
        return self.sqs[qid][0] if qid is not None else None

    def dequeue(self, set_idx: int) -> int:
        qid = self.qlt.get(set_idx)
        if qid is None:
            raise ProtocolError(f"dequeue on set {set_idx} with no pending requests")
        q = self.sqs[qid]
        core = q.popleft()
        del self.members[core]
        if not q:
            del self.qlt[set_idx]
            del self.sqs[qid]
            self.free_ids.append(qid)
        return core

    def __contains__(self, core):
        return core in self.members


class LastLevelCache:
    """Inclusive, way/set-partitioned LLC controller.

    Only the state machine lives here.  Back-invalidations are returned to the
    caller (the engine), which owns the private hierarchies and the PWBs.
    """

    def __init__(self, config: SystemConfig, policy: Optional[ReplacementPolicy] = None):
        self.config = config
        self.geom = config.llc_geom
        self.shift = self.geom.line_size.bit_length() - 1
        self.policy = policy or LRUPolicy()
        self.sets = [[None] * self.geom.num_ways for _ in range(self.geom.num_sets)]
        self.part_of = {}
        self.sequencers = {}
        for p in config.partitions:
            for c in p.sharers:
                self.part_of[c] = p
            if p.mode is Mode.SEQUENCED:
                self.sequencers[p.id] = SetSequencer(min(p.set_count, p.num_sharers))
        self.pending_evict = {}   # requester -> (set, way)
        self.evict_while_queued = config.ss_evict_while_queued
        self.clock = 0

    # -- helpers -------------------------------------------------------------

    def set_of(self, core: int, addr: int) -> int:
        return set_index(addr, self.geom, self.part_of[core])

    def find(self, set_idx: int, line: int, ways) -> Optional[int]:
        row = self.sets[set_idx]
        for w in ways:
            m = row[w]
            if m is not None and m.line == line:
                return w
        return None

    def _touch(self, meta):
        self.clock += 1
        meta.stamp = self.clock

    def holders(self, set_idx: int, ways) -> tuple:
        """Per allowed way: the lowest sharer id, or None when the way is free."""
        out = []
        for w in ways:
            m = self.sets[set_idx][w]
            out.append(min(m.sharers) if m is not None and m.sharers else None)
        return tuple(out)

    def _check_isolation(self, core, set_idx):
        p = self.part_of.get(core)
        if p is None:
            raise IsolationError(f"core {core} belongs to no partition", core=core)
        if set_idx not in p.set_range:
            raise IsolationError(f"core {core} touched set {set_idx} outside partition {p.id}", core=core)
        return p

    # -- requests ------------------------------------------------------------

    def handle_request(self, core: int, addr: int, slot: int = 0, set_idx: Optional[int] = None) -> RequestOutcome:
        part = self.part_of.get(core)
        if part is None:
            raise IsolationError(f"core {core} belongs to no partition", slot=slot, core=core)
        s = self.set_of(core, addr) if set_idx is None else set_idx
        self._check_isolation(core, s)
        line = addr >> self.shift
        row = self.sets[s]
        w = self.find(s, line, part.ways)
        if w is not None:
            meta = row[w]
            if meta.evicting:
                # the line is on its way out; serving it would break inclusion
                return RequestOutcome(RequestResult.WAIT, s, w)
            meta.sharers.add(core)
            self._touch(meta)
            return RequestOutcome(RequestResult.HIT, s, w)

        free = next((w for w in part.ways if row[w] is None), None)
        seq = self.sequencers.get(part.id)
        if seq is None:
            if free is not None:
                return self._fill(core, s, free, line)
            return self._evict_or_wait(core, s, part, slot, line)

        queued_now = False
        if core not in seq:
            if free is not None and seq.head(s) is None:
                return self._fill(core, s, free, line)
            seq.enqueue(s, core)
            queued_now = True
        if seq.head(s) != core:
            if free is None and self.evict_while_queued:
                out = self._evict_or_wait(core, s, part, slot, line, may_fill=False)
                if out.result is RequestResult.EVICT:
                    out.queued_now = queued_now
                    return out
            res = RequestResult.BLOCKED if free is not None else RequestResult.QUEUED
            return RequestOutcome(res, s, queued_now=queued_now)
        if free is not None:
            seq.dequeue(s)
            out = self._fill(core, s, free, line)
            out.granted = True
            out.queued_now = queued_now
            return out
        out = self._evict_or_wait(core, s, part, slot, line)
        out.queued_now = queued_now
        if out.result is RequestResult.FILL:
            seq.dequeue(s)
            out.granted = True
        return out

    def _fill(self, core, s, w, line):
        meta = LlcLineMeta(line, {core})
        self._touch(meta)
        self.sets[s][w] = meta
        claim = self.pending_evict.pop(core, None)
        if claim is not None:
            cs, cw = claim
            victim = self.sets[cs][cw]
            if victim is not None and victim.evict_for == core:
                victim.evict_for = None
        return RequestOutcome(RequestResult.FILL, s, w)

    def _evict_or_wait(self, core, s, part, slot, line, may_fill=True):
        if core in self.pending_evict:
            return RequestOutcome(RequestResult.WAIT, s, self.pending_evict[core][1])
        row = self.sets[s]
        for w in part.ways:
            m = row[w]
            if m is not None and m.evicting and m.evict_for is None:
                # adopt an orphaned eviction instead of starting another one
                m.evict_for = core
                self.pending_evict[core] = (s, w)
                return RequestOutcome(RequestResult.WAIT, s, w)
        cands = [Candidate(w, row[w].line << self.shift, row[w].stamp)
                 for w in part.ways if row[w] is not None and not row[w].evicting]
        if not cands:
            return RequestOutcome(RequestResult.WAIT, s)
        w = self.policy.select_victim(s, cands)
        if w not in part.ways or row[w] is None or row[w].evicting:
            raise ProtocolError(f"replacement policy chose way {w}, which is not evictable", slot=slot)
        meta = row[w]
        victim = meta.line << self.shift
        sharers = tuple(sorted(meta.sharers))
        if not sharers:
            # nobody holds it privately: drop it and fill in the same slot
            row[w] = None
            if not may_fill:
                return RequestOutcome(RequestResult.EVICT, s, w, victim=victim)
            out = self._fill(core, s, w, line)
            out.victim = victim
            return out
        meta.evicting = True
        meta.evict_for = core
        self.pending_evict[core] = (s, w)
        return RequestOutcome(RequestResult.EVICT, s, w, victim=victim, backinv=sharers)

    # -- write-backs ---------------------------------------------------------

    def handle_writeback(self, core: int, addr: int, dirty: bool = False, slot: int = 0):
        """Apply a write-back; returns ``(WritebackResult, set, way)``."""
        part = self.part_of.get(core)
        if part is None:
            raise IsolationError(f"core {core} belongs to no partition", slot=slot, core=core)
        s = self.set_of(core, addr)
        line = addr >> self.shift
        w = self.find(s, line, part.ways)
        if w is None or core not in self.sets[s][w].sharers:
            raise ProtocolError(f"core {core} wrote back {addr:#x}, which it does not share", slot=slot, core=core)
        meta = self.sets[s][w]
        meta.sharers.discard(core)
        meta.dirty = meta.dirty or dirty
        if meta.sharers or not meta.evicting:
            return WritebackResult.MERGED, s, w
        self.sets[s][w] = None
        if meta.evict_for is not None:
            self.pending_evict.pop(meta.evict_for, None)
        return WritebackResult.FREED, s, w

    def absorb_dirty(self, core: int, addr: int):
        """Fold dirty data of a silently dropped private line into the LLC copy."""
        s = self.set_of(core, addr)
        w = self.find(s, addr >> self.shift, self.part_of[core].ways)
        if w is not None:
            self.sets[s][w].dirty = True

    # -- preload / inspection -------------------------------------------------

    def install(self, core: int, addr: int) -> tuple:
        """Place a line owned by ``core`` without any bus traffic (scenario setup)."""
        part = self.part_of[core]
        s = self.set_of(core, addr)
        line = addr >> self.shift
        w = self.find(s, line, part.ways)
        if w is not None:
            self.sets[s][w].sharers.add(core)
            return s, w
        free = next((w for w in part.ways if self.sets[s][w] is None), None)
        if free is None:
            raise ProtocolError(f"cannot preload {addr:#x}: set {s} is full")
        meta = LlcLineMeta(line, {core})
        self._touch(meta)
        self.sets[s][free] = meta
        return s, free

    def lookup_line(self, set_idx: int, addr: int) -> Optional[LlcLineMeta]:
        line = addr >> self.shift
        for m in self.sets[set_idx]:
            if m is not None and m.line == line:
                return m
        return None

    def check_invariants(self, hierarchies):
        """Inclusivity and sharer-set containment; raises AssertionError."""
        for core, hier in enumerate(hierarchies):
            part = self.part_of[core]
            for addr in hier.lines():
                s = self.set_of(core, addr)
                w = self.find(s, addr >> self.shift, part.ways)
                if w is None:
                    raise AssertionError(f"inclusion: core {core} caches {addr:#x} but the LLC does not")
                if core not in self.sets[s][w].sharers:
                    raise AssertionError(f"inclusion: core {core} caches {addr:#x} but is not a sharer")
        for p in self.config.partitions:
            for s in p.set_range:
                for w in range(self.geom.num_ways):
                    m = self.sets[s][w]
                    if m is None:
                        continue
                    if w not in p.ways:
                        raise AssertionError(f"isolation: set {s} way {w} used outside partition {p.id}")
                    if not m.sharers <= p.sharers:
                        raise AssertionError(f"isolation: line {m.line:#x} shared by {m.sharers} outside partition {p.id}")
