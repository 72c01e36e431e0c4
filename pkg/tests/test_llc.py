import dataclasses

import pytest

from llcsim.cache import ScriptedPolicy
from llcsim.config import Mode, single_set_config
from llcsim.errors import IsolationError, ProtocolError
from llcsim.llc import LastLevelCache, RequestResult, SetSequencer, WritebackResult

L = 64


def llc(mode, n=4, ways=2, victims=(), **kw):
    cfg = single_set_config(n, range(n), ways, mode)
    if kw:
        cfg = dataclasses.replace(cfg, **kw)
    return LastLevelCache(cfg, ScriptedPolicy(victims))


def test_hit_adds_sharer():
    c = llc("nss")
    c.install(2, 0x10 * L)
    out = c.handle_request(1, 0x10 * L)
    assert out.result is RequestResult.HIT
    assert c.lookup_line(0, 0x10 * L).sharers == {1, 2}


def test_fill_into_free_way():
    c = llc("nss")
    out = c.handle_request(0, 0x10 * L)
    assert out.result is RequestResult.FILL and out.completes
    assert c.lookup_line(0, 0x10 * L).sharers == {0}


def test_eviction_targets_the_sharer():
    l1, l2 = 0x10 * L, 0x20 * L
    c = llc("nss", victims=[l1])
    c.install(2, l1)
    c.install(2, l2)
    out = c.handle_request(0, 0x30 * L)
    assert out.result is RequestResult.EVICT
    assert (out.victim, out.backinv) == (l1, (2,))
    assert c.handle_request(0, 0x30 * L).result is RequestResult.WAIT
    res, _, _ = c.handle_writeback(2, l1)
    assert res is WritebackResult.FREED
    assert c.handle_request(0, 0x30 * L).result is RequestResult.FILL


def test_hit_on_line_under_eviction_waits():
    l1 = 0x10 * L
    c = llc("nss", ways=1, victims=[l1])
    c.install(2, l1)
    c.handle_request(0, 0x30 * L)
    assert c.handle_request(1, l1).result is RequestResult.WAIT


def test_writeback_merges_while_other_sharers_remain():
    l1 = 0x10 * L
    c = llc("nss", ways=1, victims=[l1])
    c.install(1, l1)
    c.install(2, l1)
    out = c.handle_request(0, 0x30 * L)
    assert set(out.backinv) == {1, 2}
    assert c.handle_writeback(1, l1)[0] is WritebackResult.MERGED
    assert c.handle_writeback(2, l1)[0] is WritebackResult.FREED


def test_writeback_of_unshared_line_is_a_protocol_error():
    c = llc("nss")
    with pytest.raises(ProtocolError):
        c.handle_writeback(0, 0x10 * L)


def test_sequenced_queue_order():
    c = llc("ss", ways=1, ss_evict_while_queued=False)
    c.install(3, 0x10 * L)
    first = c.handle_request(1, 0x20 * L)
    second = c.handle_request(2, 0x30 * L)
    assert first.queued_now and first.result is RequestResult.EVICT
    assert second.queued_now and second.result is RequestResult.QUEUED
    seq = c.sequencers[0]
    assert seq.queue(0) == (1, 2)


def test_sequenced_free_way_reserved_for_head():
    c = llc("ss", ways=1, ss_evict_while_queued=False)
    c.install(3, 0x10 * L)
    c.handle_request(1, 0x20 * L)
    c.handle_request(2, 0x30 * L)
    c.handle_writeback(3, 0x10 * L)
    assert c.handle_request(2, 0x30 * L).result is RequestResult.BLOCKED
    out = c.handle_request(1, 0x20 * L)
    assert out.result is RequestResult.FILL and out.granted
    assert c.sequencers[0].head(0) == 2


def test_queued_core_may_evict_for_itself():
    c = llc("ss", ways=2)
    c.install(3, 0x10 * L)
    c.install(3, 0x11 * L)
    head = c.handle_request(1, 0x20 * L)
    behind = c.handle_request(2, 0x30 * L)
    assert head.result is RequestResult.EVICT and behind.result is RequestResult.EVICT
    assert {head.victim, behind.victim} == {0x10 * L, 0x11 * L}
    assert c.sequencers[0].queue(0) == (1, 2)


def test_private_owner_always_fills_or_evicts():
    cfg = single_set_config(2, [0], 1, "p")
    c = LastLevelCache(cfg)
    assert c.handle_request(0, 0x10 * L).result is RequestResult.FILL
    out = c.handle_request(0, 0x20 * L)
    assert out.result is RequestResult.EVICT and out.backinv == (0,)


def test_isolation_enforced():
    cfg = single_set_config(2, [0], 1, "p")
    c = LastLevelCache(cfg)
    with pytest.raises(IsolationError):
        c.handle_request(1, 0x10 * L, set_idx=0)


def test_sequencer_table():
    s = SetSequencer(2)
    s.enqueue(5, 2)
    s.enqueue(5, 3)
    assert s.head(5) == 2
    assert s.dequeue(5) == 2 and s.head(5) == 3
    s.dequeue(5)
    assert 5 not in s.qlt and s.head(5) is None
    with pytest.raises(ProtocolError):
        s.dequeue(5)


def test_sequencer_one_entry_per_core():
    s = SetSequencer(2)
    s.enqueue(1, 0)
    with pytest.raises(ProtocolError):
        s.enqueue(2, 0)
