import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicesched.model import SliceSchedError, line_network
from slicesched.schedule import (
    ALMOST_REGULAR,
    IRREGULAR,
    REGULAR,
    CyclicSchedule,
    build_block_schedule,
    build_orr,
    classify_regularity,
    inter_scheduling_stats,
)

ROUTE3 = ("e0", "e1", "e2")


def test_orr_stats_on_three_link_line():
    orr = build_orr(ROUTE3, 1)
    assert orr.slots == (frozenset({"e0", "e2"}), frozenset({"e1"}))
    st_ = inter_scheduling_stats(orr, ROUTE3)
    assert st_.k_min["e0"] == st_.k_max["e0"] == 2
    assert st_.pair_min[("e0", "e1")] == st_.pair_max[("e0", "e1")] == 1


def test_two_adjacent_activations_gap():
    s = CyclicSchedule.from_lists([["e"], ["e"], [], []])
    st_ = inter_scheduling_stats(s)
    assert (st_.k_min["e"], st_.k_max["e"]) == (1, 3)
    assert classify_regularity(s) == IRREGULAR


def test_unscheduled_route_link_is_named():
    with pytest.raises(SliceSchedError, match="e9"):
        inter_scheduling_stats(build_orr(ROUTE3, 1), ("e0", "e9"))


def test_classification_examples():
    assert classify_regularity(CyclicSchedule.from_lists([["e0"], ["e1"], ["e2"]])) == REGULAR
    worked = CyclicSchedule.from_line("1 2 4 1 3 1 2 5 1 3")
    assert classify_regularity(worked) == ALMOST_REGULAR


def test_orr_shapes():
    assert build_orr(ROUTE3, 2).slots == (frozenset({"e0"}), frozenset({"e1"}), frozenset({"e2"}))
    five = build_orr(tuple(f"h{i}" for i in range(5)), 1)
    assert five.slots[0] == frozenset({"h0", "h2", "h4"})
    for e in ROUTE3:
        assert build_orr(ROUTE3, 1).rate(e) == pytest.approx(0.5)
    with pytest.raises(SliceSchedError):
        build_orr((), 1)


def test_orr_clamp():
    clamped = build_orr(("a", "b"), 3)
    assert clamped.K == 2
    raw = build_orr(("a", "b"), 3, clamp=False)
    assert raw.K == 4 and raw.slots[2] == frozenset()


def test_block_schedule():
    s = build_block_schedule(ROUTE3, (1, 1, 1), 3)
    assert s.slots == (frozenset({"e2"}), frozenset({"e1"}), frozenset({"e0"}))
    padded = build_block_schedule(ROUTE3, (1, 2, 1), 6)
    assert padded.K == 6 and padded.slots[-1] == frozenset()
    with pytest.raises(SliceSchedError):
        build_block_schedule(ROUTE3, (2, 2, 2), 3)


def test_validate_rejects_conflicting_slot():
    net = line_network(3)
    with pytest.raises(SliceSchedError, match="slot 0"):
        CyclicSchedule.from_lists([["e0", "e1"], ["e2"]]).validate(net)
    build_orr(ROUTE3, 1).validate(net)


def test_json_and_line_roundtrip(tmp_path):
    s = build_orr(ROUTE3, 1)
    path = tmp_path / "s.json"
    s.dump(path)
    assert CyclicSchedule.load(path) == s
    line = CyclicSchedule.from_line("1 _ 2")
    assert line.to_line() == "1 _ 2"
    assert line.expand([["a", "b"], ["c"]]).slots[0] == frozenset({"a", "b"})
    with pytest.raises(SliceSchedError):
        CyclicSchedule.from_json({"K": 5, "slots": [["a"]]})


schedules = st.lists(
    st.sets(st.sampled_from(["a", "b", "c"]), max_size=2), min_size=1, max_size=12
).map(CyclicSchedule.from_lists)


@settings(max_examples=200, deadline=None)
@given(schedules, st.integers(0, 20))
def test_classification_rotation_invariant(s, shift):
    assert classify_regularity(s) == classify_regularity(s.rotate(shift))


@settings(max_examples=200, deadline=None)
@given(schedules)
def test_gap_bounds(s):
    st_ = inter_scheduling_stats(s)
    for e in s.items:
        assert 1 <= st_.k_min[e] <= st_.k_max[e] <= s.K
    if classify_regularity(s) == REGULAR:
        for e in s.items:
            assert st_.k_max[e] * s.count(e) == s.K


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 9), st.integers(0, 8))
def test_orr_slots_are_valid(n, phi):
    phi = min(phi, n - 1)
    net = line_network(n, phi=phi)
    orr = build_orr(net.link_ids, phi)
    orr.validate(net)
    assert sorted(e for slot in orr.slots for e in slot) == sorted(net.link_ids)
