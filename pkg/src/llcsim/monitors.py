"""Runtime monitors for the distance properties of best-effort shared partitions.

Both watch every core as a potential core-under-analysis.  They sample, at the
start of each slot the core owns while its request is outstanding, the distance
from each way's holder in the request's LLC set to the core.  A write-back sent
by the watched core ends the observation window; the next sample starts a new one.

* :class:`DistanceMonitor` flags any way whose holder distance grows.
* :class:`VictimDrainMonitor` flags a pending eviction whose way has neither
  been freed nor passed to a closer holder within ``2(n-1)`` periods.
"""
from __future__ import annotations

from typing import NamedTuple

from .bus import TxKind
from .config import Mode, distance


class Violation(NamedTuple):
    monitor: str
    core: int
    slot: int
    detail: str


class _Base:
    name = "monitor"

    def __init__(self, config, cores=None):
        self.config = config
        self.enabled = config.is_one_slot
        n = config.num_cores
        self.dist = [[distance(config.schedule, h, c) for c in range(n)] for h in range(n)] if self.enabled else None
        eligible = [c for c in range(n) if self._eligible(config.partition_of(c))]
        self.cores = set(eligible if cores is None else set(cores) & set(eligible))
        self.state = {}
        self.violations = []
        self.samples = 0

    def _eligible(self, part) -> bool:
        return part.mode is not Mode.SEQUENCED

    def _sample(self, eng, core):
        req = eng.bufs[core].prb
        llc = eng.llc
        part = llc.part_of[core]
        s = llc.set_of(core, req.addr)
        hs = llc.holders(s, part.ways)
        return (req.entry_slot, req.addr), s, [None if h is None else self.dist[h][core] for h in hs]

    def before_slot(self, eng, slot, owner):
        if not self.enabled or owner not in self.cores:
            return
        req = eng.bufs[owner].prb
        if req is None or req.issue_slot > slot:
            self.state.pop(owner, None)
            return
        key, set_idx, dists = self._sample(eng, owner)
        self.samples += 1
        st = self.state.get(owner)
        if st is None or st["key"] != key:
            st = self.state[owner] = {"key": key, "set": set_idx}
            self._open(st, eng, owner, slot, dists)
        else:
            self._check(st, eng, owner, slot, dists)

    def after_slot(self, eng, slot, owner, kind, completed):
        if owner in self.state and (kind is TxKind.WRITEBACK or completed is not None):
            del self.state[owner]

    def _open(self, st, eng, core, slot, dists):
        raise NotImplementedError

    def _check(self, st, eng, core, slot, dists):
        raise NotImplementedError


class DistanceMonitor(_Base):
    """Per-way holder distance never grows between samples of one window."""

    name = "distance-nonincreasing"

    def _open(self, st, eng, core, slot, dists):
        st["last"] = list(dists)

    def _check(self, st, eng, core, slot, dists):
        last = st["last"]
        for w, d in enumerate(dists):
            if d is None:
                continue
            if last[w] is not None and d > last[w]:
                self.violations.append(Violation(self.name, core, slot,
                                                 f"set {st['set']} way {w}: distance {last[w]} -> {d}"))
            last[w] = d


class VictimDrainMonitor(_Base):
    """An eviction pending for the watched core resolves within 2(n-1) periods."""

    name = "victim-drain"

    def _eligible(self, part) -> bool:
        return part.mode is not Mode.SEQUENCED and part.num_sharers >= 2

    def _open(self, st, eng, core, slot, dists):
        st["claims"] = {}
        self._check(st, eng, core, slot, dists)

    def _check(self, st, eng, core, slot, dists):
        claims = st["claims"]
        part = eng.llc.part_of[core]
        limit = 2 * (part.num_sharers - 1) * self.config.schedule.period_slots
        ways = list(part.ways)
        for w, (start, d0) in list(claims.items()):
            d = dists[ways.index(w)]
            if d is None or d < d0:
                del claims[w]
            elif slot - start >= limit:
                self.violations.append(Violation(self.name, core, slot,
                                                 f"set {st['set']} way {w}: distance still {d} after {slot - start} slots"))
                del claims[w]

    def after_slot(self, eng, slot, owner, kind, completed):
        super().after_slot(eng, slot, owner, kind, completed)
        st = self.state.get(owner)
        pend = eng.llc.pending_evict.get(owner)
        if st is None or pend is None or pend[0] != st["set"] or pend[1] in st["claims"]:
            return
        # the window opens in the slot that started (or adopted) the eviction
        h = eng.llc.holders(pend[0], (pend[1],))[0]
        if h is not None:
            st["claims"][pend[1]] = (slot, self.dist[h][owner])


def default_monitors(config):
    return [DistanceMonitor(config), VictimDrainMonitor(config)]
