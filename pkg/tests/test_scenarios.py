import pytest

from llcsim.analysis import wcl_1stdm_slots, wcl_sequencer_slots, BoundInputs
from llcsim.config import single_set_config
from llcsim.errors import ScriptError
from llcsim.scenarios import ScenarioScript, build, golden, golden_diff, replay_scenario, SCENARIOS


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_golden_logs_match(name):
    res = replay_scenario(build(name))
    assert golden_diff(name, res.log.to_text()) == []
    assert res.log.to_text() == golden(name)


def test_fig2_never_completes():
    res = replay_scenario(build("fig2"))
    assert res.cua_pending()
    assert res.report.slots == 300


def test_fig2_under_one_slot_schedule_completes_within_bound():
    res = replay_scenario(build("fig2_1s"))
    assert res.cua_latency_slots <= wcl_1stdm_slots(BoundInputs(2, 2, 1, 1, 0, 1))


def test_fig3_series_and_completion():
    res = replay_scenario(build("fig3"))
    assert res.tracked_series() == [2, 1, "free"]
    # cua owns every fourth slot: slots 0, 4, 8, 12 -> completes in its 4th slot
    assert res.cua_done_slot == 12


def test_fig3_sequenced_shrinks_latency():
    nss = replay_scenario(build("fig3"))
    ss = replay_scenario(build("fig3_ss"))
    assert ss.cua_latency_slots < nss.cua_latency_slots
    assert ss.cua_latency_slots <= wcl_sequencer_slots(3, 4)


def test_fig4_distance_increases():
    series = replay_scenario(build("fig4")).tracked_series()
    assert series == [1, "free", 3]
    nums = [v for v in series if v != "free"]
    assert any(b > a for a, b in zip(nums, nums[1:]))


def test_empty_script_gives_empty_log():
    script = ScenarioScript("empty", single_set_config(2, [0, 1], 1, "nss"), horizon=10)
    res = replay_scenario(script)
    assert res.log.to_text() == "" or all(e.kind == "IDLE" for e in res.log)
    assert res.tracked_series() == []


def test_unknown_scenario():
    with pytest.raises(ScriptError):
        build("nosuch")


def test_request_in_foreign_slot_rejected():
    script = ScenarioScript("bad", single_set_config(2, [0, 1], 1, "nss"), requests=[(1, 0, 0x40)])
    with pytest.raises(ScriptError):
        replay_scenario(script)
