import pytest

from llcsim.cache import ScriptedPolicy
from llcsim.config import TdmSchedule, paper_eval_config
from llcsim.engine import Engine
from llcsim.monitors import DistanceMonitor, VictimDrainMonitor, default_monitors
from llcsim.scenarios import build
from llcsim.analysis import check_bound
from llcsim.workload import core_traces

from fuzzing import random_machine


def run_script(name):
    sc = build(name)
    mons = default_monitors(sc.config)
    eng = Engine(sc.config, policy=ScriptedPolicy(sc.victims), monitors=mons, debug=True)
    for c, a in sc.preload:
        eng.preload(c, a)
    for s, c, a in sc.requests:
        eng.inject(s, c, a)
    eng.run(sc.horizon, until="quiescent")
    return mons


@pytest.mark.parametrize("name", ["fig2_1s", "fig3", "fig4"])
def test_scenarios_are_clean(name):
    mons = run_script(name)
    assert all(m.samples > 0 for m in mons)
    assert not [v for m in mons for v in m.violations]


def test_distance_monitor_flags_growth():
    m = DistanceMonitor(paper_eval_config("nss"))
    st = {"set": 0}
    m._open(st, None, 0, 0, [1, 2, None])
    m._check(st, None, 0, 4, [1, 1, 3])
    assert m.violations == []
    m._check(st, None, 0, 8, [2, 1, 3])
    (v,) = m.violations
    assert v.monitor == "distance-nonincreasing" and "1 -> 2" in v.detail


def test_monitors_idle_on_multi_slot_schedules():
    sc = build("fig2")
    mons = default_monitors(sc.config)
    assert not any(m.enabled for m in mons)


def test_scope():
    assert not DistanceMonitor(paper_eval_config("ss")).cores
    assert DistanceMonitor(paper_eval_config("p")).cores == {0, 1, 2, 3}
    assert not VictimDrainMonitor(paper_eval_config("p")).cores
    assert VictimDrainMonitor(paper_eval_config("nss")).cores == {0, 1, 2, 3}


def test_eval_machine_runs_are_clean():
    cfg = paper_eval_config("nss")
    mons = default_monitors(cfg)
    rep = Engine(cfg, core_traces(4, 2, 2048, 300), monitors=mons).run()
    assert rep.complete and rep.violations == []


def test_multi_set_partitions_can_outlast_the_drain_window():
    # A holder's own write-back for an eviction in another set can sit ahead
    # of the victim in its PWB.  The drain takes longer than 2(n-1) periods,
    # yet the per-request bound still holds.
    cfg, traces = random_machine(26, sets=2)
    mons = default_monitors(cfg)
    rep = Engine(cfg, traces, monitors=mons, debug=True).run(10**5)
    assert {v.monitor for v in rep.violations} == {"victim-drain"}
    assert check_bound(rep).passed
