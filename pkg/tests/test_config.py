import pytest

from llcsim.config import (CacheGeometry, Mode, PartitionSpec, SystemConfig, TdmSchedule, distance,
                           load_config, one_slot_schedule, paper_eval_config, validate_one_slot)
from llcsim.errors import ConfigError

CONFIGS = __import__("pathlib").Path(__file__).resolve().parent.parent / "configs"


def test_one_slot_detection():
    assert validate_one_slot(TdmSchedule((0, 1, 2, 3)), 4)
    assert not validate_one_slot(TdmSchedule((0, 1, 1)), 2)
    assert validate_one_slot(TdmSchedule((0,)), 1)
    assert not validate_one_slot(TdmSchedule((0, 1)), 3)


def test_slot_ownership_is_periodic():
    s = TdmSchedule((2, 0, 1))
    assert [s.owner(k) for k in range(7)] == [2, 0, 1, 2, 0, 1, 2]
    assert s.next_owned_slot(1, 3) == 5


def test_distance_examples():
    s = one_slot_schedule(4)
    assert distance(s, 2, 0) == 2
    assert distance(s, 3, 0) == 1
    for c in range(4):
        assert distance(s, c, c) == 4


def test_distance_rejects_multi_slot_schedule():
    with pytest.raises(ConfigError):
        distance(TdmSchedule((0, 1, 1)), 0, 1)


def test_paper_eval_document():
    cfg = load_config(CONFIGS / "paper_eval_ss.toml")
    assert cfg.num_cores == 4 and cfg.line_size == 64
    assert (cfg.l2_geom.num_sets, cfg.l2_geom.num_ways) == (16, 4)
    assert (cfg.llc_geom.num_sets, cfg.llc_geom.num_ways) == (32, 16)
    assert cfg.partitions[0].mode is Mode.SEQUENCED
    assert cfg.partitions[0].capacity_lines == 16
    assert cfg.l2_capacity_lines() == 64
    assert cfg == paper_eval_config("ss")


def test_private_document_matches_preset():
    assert load_config(CONFIGS / "paper_eval_p.toml") == paper_eval_config("p")


BASE = """
cores = 2
[[partitions]]
sets = "0..1"
ways = "0..3"
sharers = [0]
mode = "p"
"""


def test_overlapping_partitions_rejected():
    doc = BASE + """
[[partitions]]
sets = "1..2"
ways = [3, 4]
sharers = [1]
mode = "p"
"""
    with pytest.raises(ConfigError, match="overlap"):
        load_config(doc)


def test_core_in_two_partitions_rejected():
    doc = BASE + """
[[partitions]]
sets = "4..5"
ways = "0..3"
sharers = [0, 1]
mode = "nss"
"""
    with pytest.raises(ConfigError):
        load_config(doc)


def test_way_mask_integer():
    doc = BASE.replace('ways = "0..3"', "ways = 0xF0") + """
[[partitions]]
sets = "2..2"
ways = 3
sharers = [1]
mode = "p"
"""
    cfg = load_config(doc)
    assert cfg.partitions[0].ways == (4, 5, 6, 7)
    assert cfg.partitions[1].ways == (0, 1)


@pytest.mark.parametrize("bad", [
    "cores = 0",
    "cores = 1\nslot_width = 0\n[[partitions]]\nsets=0\nways=1\nsharers=[0]\nmode='p'",
    "cores = 1\nline_size = 48\n[[partitions]]\nsets=0\nways=1\nsharers=[0]\nmode='p'",
    "cores = 2\n[[partitions]]\nsets=0\nways=1\nsharers=[0,1]\nmode='p'",
    "cores = 1\n[[partitions]]\nsets=0\nways=1\nsharers=[0]\nmode='weird'",
    "cores = 1\nschedule=[0, 3]\n[[partitions]]\nsets=0\nways=1\nsharers=[0]\nmode='p'",
    "cores = [",
])
def test_invalid_documents(bad):
    with pytest.raises(ConfigError):
        load_config(bad)


def test_core_without_partition_rejected():
    with pytest.raises(ConfigError):
        SystemConfig(2, one_slot_schedule(2), (PartitionSpec(0, 0, 1, (0,), frozenset([0]), Mode.PRIVATE),))


def test_geometry_validation():
    with pytest.raises(ConfigError):
        CacheGeometry(0, 4)
    assert CacheGeometry(16, 4).capacity_lines == 64
