"""Set-associative cache arrays, replacement policies and the private L1/L2 hierarchy."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional

from .config import CacheGeometry, PartitionSpec
from .errors import ConfigError, ScriptError


def set_index(addr: int, geom: CacheGeometry, partition: Optional[PartitionSpec] = None) -> int:
    """Set that the line holding ``addr`` maps to.

    Inside a partition the line address is taken modulo the partition's set
    count and offset to its first set.
    """
    line = addr // geom.line_size
    if partition is None:
        return line % geom.num_sets
    return partition.set_start + line % partition.set_count


class Placed(NamedTuple):
    way: int


class NeedsEviction(NamedTuple):
    victim_addr: int
    way: int


class InvalidateResult(enum.Enum):
    WAS_DIRTY = "dirty"
    WAS_CLEAN = "clean"
    NOT_PRESENT = "absent"


class Candidate(NamedTuple):
    way: int
    addr: int
    stamp: int


class ReplacementPolicy:
    name = "abstract"

    def select_victim(self, set_idx: int, candidates: list) -> int:
        raise NotImplementedError


class LRUPolicy(ReplacementPolicy):
    """Evict the least recently touched candidate; ties go to the lowest way."""

    name = "lru"

    def select_victim(self, set_idx, candidates):
        best = min(candidates, key=lambda c: (c.stamp, c.way))
        return best.way


class ScriptedPolicy(ReplacementPolicy):
    """Victims dictated by a script, for steering worst-case constructions.

    Each script entry is a byte address that must be among the candidates.
    Once the script runs out the fallback policy (LRU by default) decides.
    """

    name = "scripted"

    def __init__(self, victims: Iterable[int] = (), fallback: Optional[ReplacementPolicy] = None):
        self.victims = list(victims)
        self.fallback = fallback or LRUPolicy()
        self.used = 0

    def select_victim(self, set_idx, candidates):
        if self.used >= len(self.victims):
            return self.fallback.select_victim(set_idx, candidates)
        want = self.victims[self.used]
        self.used += 1
        for c in candidates:
            if c.addr == want:
                return c.way
        raise ScriptError(f"scripted victim {want:#x} is not evictable in set {set_idx} "
                          f"(candidates {[hex(c.addr) for c in candidates]})")


class SetAssocCache:
    """Tag/state array of one cache level.

    Lines are identified by byte address; the array stores line numbers.  Each
    touch (hit or install) stamps the way with a global counter, which is all
    the LRU policy needs.
    """

    def __init__(self, geom: CacheGeometry, name: str = "cache", policy: Optional[ReplacementPolicy] = None):
        self.geom = geom
        self.name = name
        self.policy = policy or LRUPolicy()
        self.shift = geom.line_size.bit_length() - 1
        self.tags = [[-1] * geom.num_ways for _ in range(geom.num_sets)]
        self.dirty = [[False] * geom.num_ways for _ in range(geom.num_sets)]
        self.stamp = [[0] * geom.num_ways for _ in range(geom.num_sets)]
        self.clock = 0

    def _set(self, addr):
        return (addr >> self.shift) % self.geom.num_sets

    def lookup(self, addr: int, touch: bool = True) -> Optional[int]:
        """Way holding ``addr`` (a hit) or ``None`` (a miss)."""
        line = addr >> self.shift
        s = line % self.geom.num_sets
        tags = self.tags[s]
        for w in range(len(tags)):
            if tags[w] == line:
                if touch:
                    self.clock += 1
                    self.stamp[s][w] = self.clock
                return w
        return None

    def insert(self, addr: int, way_mask: Optional[Iterable[int]] = None, dirty: bool = False):
        """Place ``addr`` in a free allowed way, or report the victim that must go first.

        Nothing is mutated when an eviction is needed; the caller evicts and retries.
        """
        ways = list(range(self.geom.num_ways)) if way_mask is None else list(way_mask)
        if not ways:
            raise ConfigError(f"{self.name}: empty way mask")
        line = addr >> self.shift
        s = line % self.geom.num_sets
        tags = self.tags[s]
        for w in ways:
            if tags[w] < 0:
                tags[w] = line
                self.dirty[s][w] = dirty
                self.clock += 1
                self.stamp[s][w] = self.clock
                return Placed(w)
        cands = [Candidate(w, tags[w] << self.shift, self.stamp[s][w]) for w in ways]
        w = self.policy.select_victim(s, cands)
        return NeedsEviction(tags[w] << self.shift, w)

    def mark_dirty(self, addr: int) -> bool:
        w = self.lookup(addr, touch=False)
        if w is None:
            return False
        self.dirty[self._set(addr)][w] = True
        return True

    def is_dirty(self, addr: int) -> bool:
        w = self.lookup(addr, touch=False)
        return w is not None and self.dirty[self._set(addr)][w]

    def invalidate(self, addr: int) -> InvalidateResult:
        w = self.lookup(addr, touch=False)
        if w is None:
            return InvalidateResult.NOT_PRESENT
        s = self._set(addr)
        was = self.dirty[s][w]
        self.tags[s][w] = -1
        self.dirty[s][w] = False
        return InvalidateResult.WAS_DIRTY if was else InvalidateResult.WAS_CLEAN

    def contents(self) -> set:
        """Byte addresses of every valid line."""
        return {t << self.shift for row in self.tags for t in row if t >= 0}

    def occupancy(self) -> int:
        return sum(1 for row in self.tags for t in row if t >= 0)


class AccessKind(enum.Enum):
    READ = "R"
    WRITE = "W"
    IFETCH = "I"


@dataclass
class PrivateHierarchy:
    """A core's L1I, L1D and L2.

    L2 includes both L1s, so dropping a line from L2 drops it everywhere.
    Writes dirty the L1D and L2 copies; instruction fetches never dirty.
    Capacity evictions out of L2 are silent towards the LLC: the LLC keeps
    the core in the line's sharer set and a later back-invalidation still
    costs the core a write-back slot.
    """

    owner: int
    l1i: SetAssocCache
    l1d: SetAssocCache
    l2: SetAssocCache

    @classmethod
    def build(cls, owner, l1i_geom, l1d_geom, l2_geom):
        return cls(owner, SetAssocCache(l1i_geom, f"c{owner}.l1i"),
                   SetAssocCache(l1d_geom, f"c{owner}.l1d"),
                   SetAssocCache(l2_geom, f"c{owner}.l2"))

    @property
    def capacity_lines(self) -> int:
        return self.l2.geom.capacity_lines

    def _l1(self, kind):
        return self.l1i if kind is AccessKind.IFETCH else self.l1d

    def access(self, kind: AccessKind, addr: int) -> bool:
        """Serve an access privately if possible; False means an LLC request is needed."""
        l1 = self._l1(kind)
        if l1.lookup(addr) is not None:
            if kind is AccessKind.WRITE:
                l1.mark_dirty(addr)
                self.l2.mark_dirty(addr)
            self.l2.lookup(addr)
            return True
        if self.l2.lookup(addr) is None:
            return False
        self._fill_l1(l1, addr, kind is AccessKind.WRITE)
        if kind is AccessKind.WRITE:
            self.l2.mark_dirty(addr)
        return True

    def _fill_l1(self, l1, addr, dirty):
        res = l1.insert(addr, dirty=dirty)
        if isinstance(res, NeedsEviction):
            # L1 victims are clean w.r.t. L2 since writes dirty both levels
            l1.invalidate(res.victim_addr)
            l1.insert(addr, dirty=dirty)

    def fill(self, kind: AccessKind, addr: int) -> list:
        """Install a line delivered by the LLC; returns silently dropped (addr, dirty) pairs."""
        dropped = []
        dirty = kind is AccessKind.WRITE
        res = self.l2.insert(addr, dirty=dirty)
        if isinstance(res, NeedsEviction):
            victim = res.victim_addr
            was_dirty = self.l2.is_dirty(victim)
            self.l1i.invalidate(victim)
            self.l1d.invalidate(victim)
            self.l2.invalidate(victim)
            dropped.append((victim, was_dirty))
            self.l2.insert(addr, dirty=dirty)
        self._fill_l1(self._l1(kind), addr, dirty)
        return dropped

    def invalidate(self, addr: int) -> InvalidateResult:
        """Back-invalidation: remove ``addr`` from every private level."""
        r2 = self.l2.invalidate(addr)
        self.l1i.invalidate(addr)
        self.l1d.invalidate(addr)
        return r2

    def holds(self, addr: int) -> bool:
        return self.l2.lookup(addr, touch=False) is not None

    def lines(self) -> set:
        return self.l2.contents()

    def check_local_inclusion(self):
        l2 = self.l2.contents()
        for l1 in (self.l1i, self.l1d):
            extra = l1.contents() - l2
            if extra:
                raise AssertionError(f"core {self.owner}: {l1.name} lines {sorted(extra)} missing from L2")
