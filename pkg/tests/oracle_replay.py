"""Replay an oracle witness through the engine (shared by tests)."""
import dataclasses

from llcsim.cache import ReplacementPolicy
from llcsim.config import Mode, single_set_config
from llcsim.engine import Engine


class WayScript(ReplacementPolicy):
    name = "way-script"

    def __init__(self, ways):
        self.ways = list(ways)

    def select_victim(self, set_idx, candidates):
        if not self.ways:
            return candidates[0].way
        w = self.ways.pop(0)
        assert any(c.way == w for c in candidates), (w, candidates)
        return w


def replay(result):
    cfg = result.config
    sys_cfg = single_set_config(cfg.N, cfg.sharers, cfg.w, Mode.parse(cfg.mode), slot_width=1)
    sys_cfg = dataclasses.replace(sys_cfg, ss_evict_while_queued=cfg.evict_while_queued)
    victims = []
    for _, _, label in result.witness:
        if "/evict" in label:
            victims.append(int(label.rsplit("evict", 1)[1]))
    eng = Engine(sys_cfg, policy=WayScript(victims), debug=True)
    fresh = iter(range(0x1000, 0x100000))
    for way in result.initial.ways:
        if way is not None:
            eng.preload(way.holder, next(fresh) * 64)
    issued = None
    for k, core, label in result.witness:
        if core == 0 and label.startswith("req") and issued is None:
            issued = k
            eng.inject(k, 0, next(fresh) * 64)
        elif label.startswith("set"):
            eng.inject(k, core, next(fresh) * 64)
    rep = eng.run(len(result.witness) + 5, until="quiescent")
    recs = [r for r in rep.records if r.core == 0]
    return recs[0].latency_slots if recs else None
