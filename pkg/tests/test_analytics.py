import random
from fractions import Fraction

import pytest

from slicesched import analytics
from slicesched.model import CapacityError, Flow, SliceAllocation, SliceSchedError, line_flow, line_network
from slicesched.oracle import exhaustive_schedule_search, max_feasible_lambda
from slicesched.schedule import CyclicSchedule, build_block_schedule, build_orr, inter_scheduling_stats
from slicesched.simulator import check_deficit_bound, default_horizon, simulate

ROUTE3 = ("e0", "e1", "e2")
F = Fraction


def test_max_supported_throughput():
    orr = build_orr(ROUTE3, 1)
    assert analytics.max_supported_throughput(orr, [1, 1, 1], ROUTE3) == F(1, 2)
    s = CyclicSchedule.from_lists([["e0", "e2"], ["e1"], ["e0", "e2"], []])
    assert analytics.max_supported_throughput(s, [2, 4, 2], ROUTE3) == 1
    with pytest.raises(SliceSchedError):
        analytics.max_supported_throughput(CyclicSchedule.from_lists([["e0"]]), [1, 1], ("e0", "e1"))


def test_throughput_sandwich_in_simulation():
    net = line_network(3)
    orr = build_orr(ROUTE3, 1)
    cap = analytics.max_supported_throughput(orr, [1, 1, 1], ROUTE3)
    for lam, bounded in ((cap, True), (cap + F(1, 100), False)):
        flow = line_flow(net, lam, 1000)
        rep = simulate(net, [flow], SliceAllocation.uniform([flow], 1), orr, 80)
        assert (rep.steady_state is not None) is bounded


def test_tau_lower_bound():
    assert analytics.tau_lower_bound(build_orr(ROUTE3, 1), ROUTE3) == 4
    rr = CyclicSchedule.from_lists([["e0"], ["e1"], ["e2"]])
    assert analytics.tau_lower_bound(rr, ROUTE3) == 5
    assert analytics.tau_lower_bound(CyclicSchedule.from_lists([["e0"]]), ("e0",)) == 1


def test_no_interference_region():
    tmin, lmax = analytics.region_no_interference([1, 2, 3])
    assert (tmin.tau, tmin.lam) == (3, 1)
    assert analytics.region_no_interference([5])[0] == analytics.RegionPoint(1, 5)


def test_no_interference_delay_equals_hops():
    net = line_network(3, phi=0)
    every = CyclicSchedule.from_lists([ROUTE3])
    flow = line_flow(net, 1, 3)
    rep = simulate(net, [flow], SliceAllocation({("f0", "e0"): 1, ("f0", "e1"): 2, ("f0", "e2"): 3}), every, 12)
    assert rep.max_delay == 3 and rep.supports


def test_total_interference_region():
    tmin, lam, ok = analytics.region_total_interference([1, 1])
    assert tmin.tau == 3 and lam == F(1, 2)
    assert analytics.region_total_interference([1, 2])[1] == F(2, 3)
    assert ok([F(1, 2), F(1)], 3)
    assert not ok([F(2)], 3)
    w = [F(1), F(3), F(2)]
    orr_rate = min(w) / len(w)
    assert orr_rate <= analytics.harmonic_mean(w) / len(w)


def test_total_interference_rate_found_by_search():
    net = line_network(2, phi=1)
    assert net.is_total_interference
    flow = line_flow(net, F(2, 3), 60)
    slices = SliceAllocation({("f0", "e0"): 1, ("f0", "e1"): 2})
    assert exhaustive_schedule_search(net, [flow], slices, 6) is not None
    over = line_flow(net, F(2, 3) + F(1, 30), 60)
    assert exhaustive_schedule_search(net, [over], slices, 6) is None


def test_primary_region():
    reg = analytics.region_primary_interference([2, 2])
    assert reg.lam_star == 1 and reg.activations == (F(1, 2), F(1, 2))
    reg = analytics.region_primary_interference([1, 2, 1])
    assert reg.lam_star == F(2, 3)
    assert reg.activations == (F(2, 3), F(1, 3), F(2, 3))
    assert reg.tau_min == analytics.RegionPoint(4, F(1, 2))
    assert reg.lam_max(3).tau == 3 * (F(1, 3) + F(2, 3) + F(1, 3)) + 1
    uniform = analytics.region_primary_interference([1, 1, 1])
    assert uniform.lam_star == F(1, 2) == uniform.tau_min.lam
    with pytest.raises(SliceSchedError):
        analytics.region_primary_interference([1])


def test_primary_rate_matches_state_search():
    net = line_network(3)
    assert max_feasible_lambda(net, ROUTE3, [1, 2, 1], quantum=F(1, 3)) == F(2, 3)


def test_worst_case_delay_bound():
    rr = CyclicSchedule.from_lists([["e0"], ["e1"], ["e2"]])
    assert analytics.worst_case_delay_bound(rr, ROUTE3) == 7
    assert analytics.worst_case_delay_bound(build_orr(ROUTE3, 1), ROUTE3) == 4
    assert analytics.worst_case_delay_bound(CyclicSchedule.from_lists([["e0"]]), ("e0",)) == 1


def test_resource_minimizing_slices():
    net = line_network(3)
    orr = build_orr(ROUTE3, 1)
    alloc = analytics.resource_minimizing_slices(net, orr, [line_flow(net, F(1, 4), 4)])
    assert alloc.get("f0", "e1") == F(1, 2)
    alloc = analytics.resource_minimizing_slices(net, orr, [line_flow(net, F(1, 3), 4)])
    assert set(alloc.widths.values()) == {F(2, 3)}
    one = line_network(1)
    flows = [Flow(n, "v0", "v1", F(3, 10), 2, ("e0",)) for n in "ab"]
    sched = CyclicSchedule.from_lists([["e0"], []])
    with pytest.raises(CapacityError, match="e0"):
        analytics.resource_minimizing_slices(one, sched, flows)


def test_delta_w():
    flow = line_flow(line_network(3), 1, 10)
    assert analytics.delta_w(build_orr(ROUTE3, 1), flow, "e0") == 0
    s = CyclicSchedule.from_lists([["e0"], ["e0"], [], []])
    assert analytics.delta_w(s, flow, "e0") == 1
    s = CyclicSchedule.from_lists([["e0"], [], ["e0"], [], []])
    d = analytics.delta_w(s, flow, "e0")
    assert 0 < d < 1


def test_region_csv(tmp_path):
    rows = analytics.region_rows([1, 2, 1], K=3)
    path = tmp_path / "r.csv"
    analytics.write_region_csv(rows, path)
    text = path.read_text().splitlines()
    assert text[0] == "model,tau,lambda"
    assert "total,5,1/3" in text
    assert "total,,2/5" in text
    assert "primary,4,1/2" in text


def random_phi1_schedule(rng, route, K):
    net = line_network(len(route))
    slots = []
    for _ in range(K):
        slot = set()
        for e in rng.sample(route, len(route)):
            if rng.random() < 0.5 and net.is_valid_activation(slot | {e}):
                slot.add(e)
        slots.append(slot)
    for e in route:
        if not any(e in s for s in slots):
            slots[rng.randrange(K)] = {e}
    for e in route:
        if not any(e in s for s in slots):
            slots.append({e})
    return net, CyclicSchedule.from_lists(slots)


def test_worst_case_bound_dominates_random_schedules():
    rng = random.Random(7)
    for _ in range(60):
        n = rng.randint(1, 4)
        route = tuple(f"e{i}" for i in range(n))
        net, sched = random_phi1_schedule(rng, route, rng.randint(1, 6))
        widths = [F(rng.randint(1, 4), 2) for _ in route]
        cap = analytics.max_supported_throughput(sched, widths, route)
        lam = cap * F(rng.randint(1, 4), 4)
        flow = line_flow(net, lam, 60)
        slices = SliceAllocation({("f0", e): w for e, w in zip(route, widths)})
        rep = simulate(net, [flow], slices, sched, default_horizon(sched, [flow]))
        assert rep.max_delay <= analytics.worst_case_delay_bound(sched, route)


def test_deficit_bound_against_worst_case_on_blocks():
    # a contiguous block of eta slots has activation gap K - eta + 1, one more
    # than its idle stretch K - eta, so the two bounds differ by |route| - 1
    net = line_network(3)
    for eta in ((1, 1, 1), (2, 1, 1), (1, 2, 3)):
        K = sum(eta)
        sched = build_block_schedule(ROUTE3, eta, K)
        k_max = inter_scheduling_stats(sched).k_max
        lam = F(1, 8)
        flow = line_flow(net, lam, 60)
        slices = SliceAllocation({("f0", e): lam * k_max[e] for e in ROUTE3})
        rep = simulate(net, [flow], slices, sched, default_horizon(sched, [flow]))
        verdict = check_deficit_bound(net, [flow], slices, sched, rep)
        assert verdict.holds
        assert verdict.bounds["f0"] == analytics.worst_case_delay_bound(sched, ROUTE3) + len(ROUTE3) - 1
        assert rep.max_delay <= analytics.worst_case_delay_bound(sched, ROUTE3)


def test_uniform_widths_primary_equals_orr():
    for w in (1, 2, F(3, 2)):
        for n in (2, 3, 4):
            route = tuple(f"e{i}" for i in range(n))
            reg = analytics.region_primary_interference([w] * n)
            orr = build_orr(route, 1)
            assert reg.lam_star == analytics.max_supported_throughput(orr, [w] * n, route) == F(w) / 2
