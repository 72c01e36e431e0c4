"""Exhaustive adversarial search over a one-set shared partition.

This is a separate, compact model of the bus/LLC protocol; it does not reuse
the engine.  Only the contended set is represented.  Each way is free or holds
a line of one core (``holder``), possibly under eviction on behalf of a
requester.  Write-backs queue as way indices, since a way under eviction can
only be released by its holder's write-back.

The adversary controls every other sharer: in its slot a core with an empty
PRB may issue nothing, a miss to the set (``set``), a request served without
touching the set (``other``), or a re-request of one of its own lines that is
being evicted (``own``).  It also picks every eviction victim.  Before the core
under analysis (core 0) issues, the search explores every state reachable from
arbitrary initial contents while core 0 is idle, so pending write-backs, queue
contents and arbitration history all start adversarially.

``brute_force_wcl`` returns the longest latency, in slots from core 0's issue
slot to its response, together with the action sequence that realises it.
"""
from __future__ import annotations

import itertools
import sys
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

NONE, SET, OTHER, OWN = 0, 1, 2, 3
REQ, WB = 0, 1
CUA = 0
INF = float("inf")


class Way(NamedTuple):
    holder: int
    evicting: bool = False
    evict_for: int = -1


class State(NamedTuple):
    phase: int
    ways: tuple          # Way or None
    prb: tuple           # per core: NONE/SET/OTHER, or (OWN, way)
    pwb: tuple           # per core: tuple of way indices
    rr: tuple            # per core: REQ/WB served last
    pe: tuple            # per core: way of its pending eviction or -1
    queue: tuple         # sequencer order (SS only)


@dataclass(frozen=True)
class MicroConfig:
    N: int
    sharers: tuple
    w: int
    m: int
    mode: str                       # "nss", "ss" or "p"
    pwb_capacity: Optional[int] = None
    evict_while_queued: bool = True
    choices: tuple = (NONE, SET, OTHER, OWN)
    rr_init: tuple = (REQ, WB)        # arbitration histories to start from

    def __post_init__(self):
        if CUA not in self.sharers:
            raise ValueError("core 0 is the core under analysis and must be a sharer")
        if self.mode == "p" and len(self.sharers) != 1:
            raise ValueError("a private partition has exactly one sharer")

    @property
    def n(self) -> int:
        return len(self.sharers)

    @property
    def cap(self) -> int:
        return self.pwb_capacity if self.pwb_capacity is not None else self.N


@dataclass
class OracleResult:
    config: MicroConfig
    max_latency: float               # slots; INF if core 0 can be starved
    witness: list                    # [(slot, core, action)] from the initial contents
    initial: Optional[State]
    issue_state: Optional[State]
    states: int
    certified: bool
    horizon: int
    overflow: bool = False
    notes: list = field(default_factory=list)


class _Overflow(Exception):
    pass


class _Model:
    def __init__(self, cfg: MicroConfig):
        self.cfg = cfg
        self.ss = cfg.mode == "ss"

    # -- helpers ----------------------------------------------------------------

    @staticmethod
    def _set(tup, i, v):
        lst = list(tup)
        lst[i] = v
        return tuple(lst)

    def _fill(self, st, o, w):
        ways = self._set(st.ways, w, Way(o))
        pe = st.pe
        if pe[o] >= 0:
            cw = pe[o]
            if ways[cw] is not None and ways[cw].evict_for == o:
                ways = self._set(ways, cw, ways[cw]._replace(evict_for=-1))
            pe = self._set(pe, o, -1)
        return st._replace(ways=ways, pe=pe)

    def _evictions(self, st, o, may_fill):
        """Outcomes of a miss that needs an eviction: [(kind, state, victim way)]."""
        if st.pe[o] >= 0:
            return [("wait", st, None)]
        for w, way in enumerate(st.ways):
            if way is not None and way.evicting and way.evict_for < 0:
                ways = self._set(st.ways, w, way._replace(evict_for=o))
                return [("wait", st._replace(ways=ways, pe=self._set(st.pe, o, w)), None)]
        out = []
        for w, way in enumerate(st.ways):
            if way is None or way.evicting:
                continue
            h = way.holder
            if len(st.pwb[h]) >= self.cfg.cap:
                raise _Overflow(f"core {h} PWB overflow")
            ways = self._set(st.ways, w, Way(h, True, o))
            pwb = self._set(st.pwb, h, st.pwb[h] + (w,))
            out.append(("evict", st._replace(ways=ways, pwb=pwb, pe=self._set(st.pe, o, w)), w))
        return out or [("wait", st, None)]

    def _miss(self, st, o):
        """Outcomes of a miss by ``o``: [(done, state, victim)]."""
        free = next((w for w, way in enumerate(st.ways) if way is None), None)
        if not self.ss:
            if free is not None:
                return [(True, self._fill(st, o, free), None)]
            return [(k == "fill", s, v) for k, s, v in self._evictions(st, o, True)]
        if o not in st.queue:
            if free is not None and not st.queue:
                return [(True, self._fill(st, o, free), None)]
            st = st._replace(queue=st.queue + (o,))
        if st.queue[0] != o:
            if free is None and self.cfg.evict_while_queued:
                return [(False, s, v) for _, s, v in self._evictions(st, o, False)]
            return [(False, st, None)]
        if free is not None:
            st = st._replace(queue=st.queue[1:])
            return [(True, self._fill(st, o, free), None)]
        return [(False, s, v) for _, s, v in self._evictions(st, o, True)]

    # -- one slot ---------------------------------------------------------------

    def step(self, st: State, cua_active: bool):
        """All successors of one slot: [(cua_completed, next_state, action)]."""
        o = st.phase
        nxt_phase = (o + 1) % self.cfg.N
        if o not in self.cfg.sharers:
            return [(False, st._replace(phase=nxt_phase), (o, "idle"))]
        starts = []
        if o == CUA:
            if cua_active:
                starts.append((st, "req"))
            elif st.prb[o] != NONE:
                starts.append((st, "pending"))
            else:
                starts.append((st, "none"))
                if OTHER in self.cfg.choices:
                    starts.append((st._replace(prb=self._set(st.prb, o, OTHER)), "other"))
        elif st.prb[o] == NONE:
            for ch in self.cfg.choices:
                if ch == NONE:
                    starts.append((st, "none"))
                elif ch == OWN:
                    for w, way in enumerate(st.ways):
                        if way is not None and way.holder == o and way.evicting:
                            starts.append((st._replace(prb=self._set(st.prb, o, (OWN, w))), f"own{w}"))
                else:
                    starts.append((st._replace(prb=self._set(st.prb, o, ch)), "set" if ch == SET else "other"))
        else:
            starts.append((st, "pending"))

        out = []
        for s0, label in starts:
            has_req = (o == CUA and cua_active) or s0.prb[o] != NONE
            has_wb = bool(s0.pwb[o])
            if has_req and has_wb:
                kind = REQ if s0.rr[o] == WB else WB
            elif has_req:
                kind = REQ
            elif has_wb:
                kind = WB
            else:
                out.append((False, s0._replace(phase=nxt_phase), (o, label)))
                continue
            s1 = s0._replace(rr=self._set(s0.rr, o, kind))
            if kind == WB:
                w = s1.pwb[o][0]
                way = s1.ways[w]
                assert way is not None and way.holder == o and way.evicting, "write-back of a line not under eviction"
                pe = s1.pe
                if way.evict_for >= 0:
                    pe = self._set(pe, way.evict_for, -1)
                s2 = s1._replace(ways=self._set(s1.ways, w, None), pwb=self._set(s1.pwb, o, s1.pwb[o][1:]), pe=pe)
                out.append((False, s2._replace(phase=nxt_phase), (o, label + "/wb")))
                continue
            req = SET if (o == CUA and cua_active) else s1.prb[o]
            if req == OTHER:
                s2 = s1._replace(prb=self._set(s1.prb, o, NONE))
                out.append((False, s2._replace(phase=nxt_phase), (o, label + "/hit")))
                continue
            if isinstance(req, tuple):
                w = req[1]
                way = s1.ways[w]
                if way is not None and way.holder == o and way.evicting:
                    out.append((False, s1._replace(phase=nxt_phase), (o, label + "/wait")))
                    continue
                s1 = s1._replace(prb=self._set(s1.prb, o, SET))
            for done, s2, victim in self._miss(s1, o):
                tag = label + ("/fill" if done else f"/evict{victim}" if victim is not None else "/wait")
                if done:
                    s2 = s2._replace(prb=self._set(s2.prb, o, NONE))
                    if o == CUA:
                        out.append((True, s2._replace(phase=nxt_phase), (o, tag)))
                        continue
                out.append((False, s2._replace(phase=nxt_phase), (o, tag)))
        return out


def initial_states(cfg: MicroConfig):
    """Canonical starting contents: held ways first, core 0 holding at most m lines."""
    n = cfg.N
    holders_pool = list(cfg.sharers)
    for used in range(cfg.w + 1):
        for holders in itertools.product(holders_pool, repeat=used):
            if sum(1 for h in holders if h == CUA) > cfg.m:
                continue
            ways = tuple(Way(h) for h in holders) + (None,) * (cfg.w - used)
            for rr in itertools.product(cfg.rr_init, repeat=n):
                yield State(0, ways, (NONE,) * n, ((),) * n, rr, (-1,) * n, ())


def brute_force_wcl(cfg: MicroConfig, horizon: int = 40, max_states: int = 2_000_000) -> OracleResult:
    model = _Model(cfg)
    # phase 1: everything reachable while core 0 is idle
    parent = {}
    frontier = deque()
    for s in initial_states(cfg):
        if s not in parent:
            parent[s] = None
            frontier.append(s)
    overflow = False
    notes = []
    while frontier:
        s = frontier.popleft()
        try:
            succ = model.step(s, cua_active=False)
        except _Overflow as exc:
            overflow = True
            notes.append(str(exc))
            continue
        for _, t, act in succ:
            if t not in parent:
                parent[t] = (s, act)
                frontier.append(t)
        if len(parent) > max_states:
            raise RuntimeError("pre-phase state space too large")
    issue_states = [s for s in parent if s.phase == CUA and s.prb[CUA] == NONE]

    # phase 2: longest path from core 0's issue slot to its response
    memo = {}
    best_next = {}
    on_stack = set()
    sys.setrecursionlimit(max(10000, sys.getrecursionlimit()))

    def longest(s):
        if s in memo:
            return memo[s]
        if s in on_stack:
            return INF
        on_stack.add(s)
        best, arg = -1, None
        try:
            succ = model.step(s, cua_active=True)
        except _Overflow as exc:
            nonlocal overflow
            overflow = True
            notes.append(str(exc))
            succ = []
        for done, t, act in succ:
            v = 1 if done else 1 + longest(t)
            if v > best:
                best, arg = v, (act, None if done else t)
        on_stack.discard(s)
        if best < 0:
            best = INF
        memo[s] = best
        best_next[s] = arg
        return best

    worst, worst_issue = -1, None
    for s in issue_states:
        v = longest(s)
        if v > worst:
            worst, worst_issue = v, s

    witness = []
    init = None
    if worst_issue is not None:
        pre = []
        cur = worst_issue
        while parent[cur] is not None:
            prev, act = parent[cur]
            pre.append(act)
            cur = prev
        init = cur
        pre.reverse()
        witness = [(k, core, a) for k, (core, a) in enumerate(pre)]
        t0 = len(pre)
        cur = worst_issue
        k = t0
        while cur is not None and cur in best_next and best_next[cur] is not None and k < t0 + 10_000:
            act, cur = best_next[cur]
            witness.append((k, act[0], act[1]))
            k += 1
            if cur is None:
                break
    certified = not overflow and worst != INF and worst <= horizon
    return OracleResult(cfg, worst, witness, init, worst_issue, len(parent) + len(memo),
                        certified, horizon, overflow, notes)


def micro_configs(max_N: int = 3, max_w: int = 2, max_m: int = 2, modes=("nss", "ss", "p")):
    """Every micro-configuration in scope: core 0 plus any subset of the others as sharers."""
    for N in range(1, max_N + 1):
        for k in range(0, N):
            for rest in itertools.combinations(range(1, N), k):
                sharers = (0,) + rest
                for w in range(1, max_w + 1):
                    for m in range(0, max_m + 1):
                        for mode in modes:
                            if (mode == "p") != (len(sharers) == 1):
                                continue
                            yield MicroConfig(N, sharers, w, m, mode)
