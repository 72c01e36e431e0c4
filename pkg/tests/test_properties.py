"""Property checks over schedules and small random machines."""
from hypothesis import given, settings, strategies as st

from llcsim.config import TdmSchedule, distance
from llcsim.engine import Engine
from llcsim.monitors import default_monitors

from fuzzing import random_machine

perms = st.integers(1, 8).flatmap(lambda n: st.permutations(list(range(n))))


@given(perms, st.data())
def test_distance_range_and_complement(order, data):
    s = TdmSchedule(tuple(order))
    n = len(order)
    a = data.draw(st.integers(0, n - 1))
    b = data.draw(st.integers(0, n - 1))
    d = distance(s, a, b)
    assert 1 <= d <= n
    if a != b:
        assert d + distance(s, b, a) == n
    else:
        assert d == n


@given(perms, st.integers(0, 7))
def test_distance_invariant_under_rotation(order, k):
    n = len(order)
    k %= n
    rot = TdmSchedule(tuple(order[k:] + order[:k]))
    s = TdmSchedule(tuple(order))
    assert all(distance(s, a, b) == distance(rot, a, b) for a in range(n) for b in range(n))


@given(perms)
def test_distance_matches_slot_count(order):
    s = TdmSchedule(tuple(order))
    n = len(order)
    for a in range(n):
        start = order.index(a)
        for b in range(n):
            nxt = next(t for t in range(start + 1, start + n + 1) if s.owner(t) == b)
            assert distance(s, a, b) == nxt - start


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_fuzzed_one_set_runs_are_sound(seed):
    from llcsim.analysis import check_bound

    cfg, traces = random_machine(seed, sets=1)
    mons = default_monitors(cfg)
    rep = Engine(cfg, traces, monitors=mons, debug=True).run(10**5)
    assert rep.complete
    assert rep.violations == []
    assert check_bound(rep).passed
