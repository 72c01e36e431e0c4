"""Scripted slot-by-slot constructions with golden event logs.

``fig2``  a core owning two slots per period starves the core under analysis.
``fig2_1s`` the same pressure under a one-slot schedule; the request completes.
``fig3``  freed ways are intercepted by a core scheduled ahead of the requester.
``fig4``  a freed way is refilled by a core further away, so a distance grows.
"""
from __future__ import annotations

import difflib
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from .cache import AccessKind, ScriptedPolicy
from .config import CacheGeometry, Mode, PartitionSpec, SystemConfig, TdmSchedule, single_set_config
from .engine import Engine, EventLog, SimReport, collapse, measure_distances
from .errors import ScriptError

LINE = 64


@dataclass
class ScenarioScript:
    name: str
    config: SystemConfig
    cua: int = 0
    preload: list = field(default_factory=list)        # (core, addr)
    requests: list = field(default_factory=list)       # (slot, core, addr)
    victims: list = field(default_factory=list)        # scripted LLC victims, in order
    horizon: int = 1000
    track_set: int = 0
    track_way: int = 0
    run_to_horizon: bool = False


@dataclass
class ScenarioResult:
    script: ScenarioScript
    log: EventLog
    report: SimReport
    distances: list          # (slot, distance) per way of the tracked set

    @property
    def cua_latency_slots(self) -> Optional[int]:
        recs = [r for r in self.report.records if r.core == self.script.cua]
        return recs[0].latency_slots if recs else None

    @property
    def cua_done_slot(self) -> Optional[int]:
        recs = [r for r in self.report.records if r.core == self.script.cua]
        return recs[0].done_slot if recs else None

    def tracked_series(self) -> list:
        if not self.distances:
            return []
        return collapse(self.distances[self.script.track_way])

    def cua_pending(self) -> bool:
        return self.cua_done_slot is None and any(
            s == self.script.cua for _, s, _ in self.script.requests)


def replay_scenario(script: ScenarioScript, debug: bool = True) -> ScenarioResult:
    cfg = script.config
    log = EventLog()
    eng = Engine(cfg, policy=ScriptedPolicy(script.victims), events=log, debug=debug,
                 track_sets=[script.track_set] if script.requests else [])
    for core, addr in script.preload:
        eng.preload(core, addr)
    for slot, core, addr in script.requests:
        if cfg.schedule.owner(slot) != core:
            raise ScriptError(f"slot {slot} belongs to core {cfg.schedule.owner(slot)}, not core {core}")
        eng.inject(slot, core, addr, AccessKind.READ)
    rep = eng.run(script.horizon, until="horizon" if script.run_to_horizon else "quiescent")
    dist = []
    if script.requests and cfg.is_one_slot:
        dist = measure_distances(log, script.track_set, script.cua, cfg.schedule)
    return ScenarioResult(script, log, rep, dist)


def _addr(line: int) -> int:
    return line * LINE


def fig2(periods: int = 100) -> ScenarioScript:
    """cua owns one slot, ci two; ci writes back in its first slot and refills in its second."""
    cfg = single_set_config(2, [0, 1], 1, Mode.BEST_EFFORT, slot_width=1, schedule=[0, 1, 1])
    reqs = [(0, 0, _addr(0x100))]
    reqs += [(3 * k + 2, 1, _addr(0x200 + k)) for k in range(periods)]
    return ScenarioScript("fig2", cfg, preload=[(1, _addr(0x1ff))], requests=reqs,
                          horizon=3 * periods, run_to_horizon=True)


def fig2_1s() -> ScenarioScript:
    """The fig2 pressure under the one-slot schedule [cua, ci]."""
    cfg = single_set_config(2, [0, 1], 1, Mode.BEST_EFFORT, slot_width=1)
    reqs = [(0, 0, _addr(0x100)), (1, 1, _addr(0x200))]
    return ScenarioScript("fig2_1s", cfg, preload=[(1, _addr(0x1ff))], requests=reqs, horizon=100)


def fig3(mode=Mode.BEST_EFFORT) -> ScenarioScript:
    """Four cores, one 2-way set; c3 holds both lines, c4 requests right before cua's slots."""
    mode = Mode.parse(mode) if isinstance(mode, str) else mode
    cfg = single_set_config(4, range(4), 2, mode, slot_width=1)
    l1, l2, x, y, z = (_addr(v) for v in (0x10, 0x20, 0x30, 0x40, 0x50))
    victims = [l1, l2, y] if mode is Mode.BEST_EFFORT else []
    return ScenarioScript("fig3" if mode is Mode.BEST_EFFORT else f"fig3_{mode.value}", cfg,
                          preload=[(2, l1), (2, l2)],
                          requests=[(0, 0, x), (3, 3, y)] + ([(7, 3, z)] if mode is Mode.BEST_EFFORT else []),
                          victims=victims, horizon=100)


def fig4() -> ScenarioScript:
    """A 2-set partition; c2 takes the way freed by c4, moving its holder from distance 1 to 3."""
    part = PartitionSpec(0, 0, 2, (0, 1), frozenset(range(4)), Mode.BEST_EFFORT)
    cfg = SystemConfig(num_cores=4, schedule=TdmSchedule((0, 1, 2, 3)), partitions=(part,),
                       slot_width=1, l1i_geom=CacheGeometry(1, 1), l1d_geom=CacheGeometry(1, 1),
                       llc_geom=CacheGeometry(2, 2))
    # even lines map to set 0, odd lines to set 1
    l1, l2, x, y = (_addr(v) for v in (0x10, 0x20, 0x30, 0x40))
    l, b, a = (_addr(v) for v in (0x11, 0x21, 0x31))
    return ScenarioScript("fig4", cfg,
                          preload=[(3, l1), (3, l2), (0, l), (2, b)],
                          requests=[(0, 0, x), (1, 1, y), (2, 2, a)],
                          victims=[l1, l2, l], horizon=100)


SCENARIOS = {"fig2": fig2, "fig2_1s": fig2_1s, "fig3": fig3,
             "fig3_ss": lambda: fig3(Mode.SEQUENCED), "fig4": fig4}


def build(name: str) -> ScenarioScript:
    try:
        return SCENARIOS[name]()
    except KeyError:
        raise ScriptError(f"unknown scenario {name!r}; choose from {', '.join(sorted(SCENARIOS))}") from None


def golden(name: str) -> str:
    return resources.files("llcsim").joinpath("goldens", f"{name}.log").read_text()


def golden_diff(name: str, text: str) -> list:
    return list(difflib.unified_diff(golden(name).splitlines(), text.splitlines(),
                                     "golden", "replay", lineterm=""))
