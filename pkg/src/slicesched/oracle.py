"""Brute-force reference solvers for desk-size instances.

None of these scale; they exist to check the fast paths.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from . import lp
from .model import Flow, InfeasibleError, Network, SliceAllocation, SliceSchedError, as_fraction
from .schedule import CyclicSchedule
from .simulator import default_horizon, simulate

DEFAULT_STATE_CAP = 2_000_000


class OracleCapError(SliceSchedError):
    """The search space is larger than the configured cap."""


def _widths_for(flow: Flow, slices) -> list[Fraction]:
    if isinstance(slices, SliceAllocation):
        return [slices.get(flow.id, e) for e in flow.route]
    if isinstance(slices, Mapping):
        return [as_fraction(slices[e]) for e in flow.route]
    ws = [as_fraction(w) for w in slices]
    if len(ws) != flow.hops:
        raise SliceSchedError("need one width per route link")
    return ws


def _route_actions(net: Network, route: Sequence[str]) -> list[tuple[int, ...]]:
    """Every valid activation set over the route hops, larger sets first."""
    out = []
    n = len(route)
    for r in range(n, -1, -1):
        for combo in itertools.combinations(range(n), r):
            if net.is_valid_activation(route[h] for h in combo):
                out.append(combo)
    return out


def activation_mix_throughput(net: Network, route: Sequence[str], widths: Sequence) -> Fraction:
    """Best throughput of any activation mix: LP over valid activation sets of the route.

    maximize lam s.t. lam <= w_h * sum_{A ni h} x_A and sum_A x_A <= 1.
    """
    widths = [as_fraction(w) for w in widths]
    actions = [a for a in _route_actions(net, route) if a]
    n_var = 1 + len(actions)
    c = [1] + [0] * len(actions)
    A, b = [], []
    for h, w in enumerate(widths):
        A.append([1] + [-w if h in a else 0 for a in actions])
        b.append(0)
    A.append([0] + [1] * len(actions))
    b.append(1)
    assert all(len(row) == n_var for row in A)
    return lp.maximize(c, A, b).value


@dataclass(frozen=True)
class CycleWitness:
    tau: int
    schedule: CyclicSchedule
    prefix: tuple[frozenset, ...]
    states_explored: int


class _StateSearch:
    def __init__(self, net: Network, route: Sequence[str], widths: Sequence[Fraction], lam: Fraction, cap: int):
        self.route = tuple(route)
        scale = math.lcm(lam.denominator, *(w.denominator for w in widths))
        self.L = int(lam * scale)
        self.W = [int(w * scale) for w in widths]
        self.actions = _route_actions(net, route)
        self.cap = cap
        self.n = len(route)

    def step(self, state: tuple[int, ...], action: tuple[int, ...]) -> tuple[int, ...]:
        served = [0] * self.n
        for h in action:
            served[h] = min(state[h], self.W[h])
        nxt = [0] * self.n
        for h in range(self.n):
            nxt[h] = state[h] - served[h] + (served[h - 1] if h else self.L)
        return tuple(nxt)

    def find_cycle(self, tau: int):
        """DFS from the initial state through states with queue sum <= lam*tau."""
        limit = self.L * tau
        start = (self.L,) + (0,) * (self.n - 1)
        if self.L > limit:
            return None, 1
        color = {start: 1}
        path_states = [start]
        path_actions: list[tuple[int, ...]] = []
        stack = [iter(self.actions)]
        while stack:
            state = path_states[-1]
            advanced = False
            for action in stack[-1]:
                nxt = self.step(state, action)
                if sum(nxt) > limit:
                    continue
                c = color.get(nxt, 0)
                if c == 1:
                    i = path_states.index(nxt)
                    cycle = path_actions[i:] + [action]
                    return (path_actions[:i], cycle), len(color)
                if c == 0:
                    if len(color) >= self.cap:
                        raise OracleCapError(f"state graph exceeds {self.cap} vertices")
                    color[nxt] = 1
                    path_states.append(nxt)
                    path_actions.append(action)
                    stack.append(iter(self.actions))
                    advanced = True
                    break
            if not advanced:
                color[path_states.pop()] = 2
                stack.pop()
                if path_actions:
                    path_actions.pop()
        return None, len(color)

    def to_slots(self, actions) -> tuple[frozenset, ...]:
        return tuple(frozenset(self.route[h] for h in a) for a in actions)


def min_max_cycle_deadline(
    net: Network,
    flow: Flow,
    slices,
    lam=None,
    cap: int = DEFAULT_STATE_CAP,
) -> CycleWitness:
    """Smallest deadline any cyclic schedule achieves for one flow with fixed widths.

    Queue-size vectors (in units of the common denominator of lambda and the
    widths) are vertices; an activation set moves one slot ahead and costs
    the queue sum it lands in. A deadline tau is achievable iff a cycle is
    reachable from the first-arrival state using only edges of cost at most
    ``lambda * tau``. tau is found by doubling then bisection.
    """
    lam = flow.lam if lam is None else as_fraction(lam)
    if lam <= 0:
        raise SliceSchedError("the state-graph oracle needs a positive arrival rate")
    widths = _widths_for(flow, slices)
    if lam > activation_mix_throughput(net, flow.route, widths):
        raise InfeasibleError(f"lambda={lam} exceeds the best activation mix for these widths")
    search = _StateSearch(net, flow.route, widths, lam, cap)

    hi = flow.hops
    found, seen = search.find_cycle(hi)
    while found is None:
        hi *= 2
        found, seen = search.find_cycle(hi)
    lo = max(1, hi // 2) if hi > flow.hops else 0
    best = (hi, found, seen)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        res, seen = search.find_cycle(mid)
        if res is None:
            lo = mid
        else:
            hi = mid
            best = (mid, res, seen)
    tau, (prefix, cycle), seen = best
    return CycleWitness(tau, CyclicSchedule(search.to_slots(cycle)), search.to_slots(prefix), seen)


def max_feasible_lambda(
    net: Network,
    route: Sequence[str],
    widths: Sequence,
    quantum=Fraction(1, 20),
    cap: int = DEFAULT_STATE_CAP,
) -> Fraction:
    """Largest multiple of ``quantum`` for which some cyclic schedule keeps the queues bounded.

    Feasibility of a grid point is shown constructively by a reachable
    cycle; the first infeasible point is certified by the activation LP.
    """
    quantum = as_fraction(quantum)
    widths = [as_fraction(w) for w in widths]
    route = tuple(route)
    ceiling = activation_mix_throughput(net, route, widths)
    best = Fraction(0)
    k = 1
    while k * quantum <= ceiling:
        lam = k * quantum
        search = _StateSearch(net, route, widths, lam, cap)
        tau = len(route)
        while True:
            found, _ = search.find_cycle(tau)
            if found is not None:
                break
            tau *= 2
        best = lam
        k += 1
    return best


# -- unique-edge matchings ---------------------------------------------------


def optimal_unique_edge_matchings(
    net: Network, rates: Mapping[str, object], max_links: int = 12
) -> tuple[list[tuple[str, ...]], Fraction]:
    """Exact minimum of sum over blocks of the largest block rate, over partitions into valid matchings.

    Subset DP; each block always contains the lowest-index remaining link, so
    blocks come out ordered by their smallest link and ties resolve to the
    lexicographically smallest block sequence.
    """
    links = sorted(rates, key=lambda e: net.index[e])
    n = len(links)
    if n > max_links:
        raise OracleCapError(f"{n} links exceed the exhaustive cap of {max_links}")
    if n == 0:
        return [], Fraction(0)
    r = [as_fraction(rates[e]) for e in links]
    full = (1 << n) - 1
    valid = [False] * (full + 1)
    peak = [Fraction(0)] * (full + 1)
    for mask in range(1, full + 1):
        low = (mask & -mask).bit_length() - 1
        rest = mask & (mask - 1)
        if rest == 0:
            valid[mask] = True
            peak[mask] = r[low]
        elif valid[rest]:
            valid[mask] = all(net.compatible(links[low], links[j]) for j in range(n) if rest >> j & 1)
            peak[mask] = max(r[low], peak[rest])

    def members(mask):
        return tuple(j for j in range(n) if mask >> j & 1)

    best: list = [None] * (full + 1)
    best[0] = (Fraction(0), ())
    for S in range(1, full + 1):
        low_bit = S & -S
        rest = S ^ low_bit
        cand = None
        sub = rest
        while True:
            m = sub | low_bit
            if valid[m]:
                tail_cost, tail_blocks = best[S ^ m]
                key = (peak[m] + tail_cost, (members(m),) + tail_blocks)
                if cand is None or key < cand:
                    cand = key
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[S] = cand
    cost, blocks = best[full]
    return [tuple(links[j] for j in b) for b in blocks], cost


# -- exhaustive schedules ----------------------------------------------------


def exhaustive_schedule_search(
    net: Network,
    flows: Sequence[Flow],
    slices: SliceAllocation,
    K_max: int,
    cap: int = 1_000_000,
) -> CyclicSchedule | None:
    """First schedule (by period, then lexicographically) that the simulator verifies.

    Candidates failing the per-link throughput check are skipped before
    simulation.
    """
    if K_max < 1:
        raise SliceSchedError("K_max must be at least 1")
    flows = list(flows)
    used = sorted({e for f in flows for e in f.route}, key=lambda e: net.index[e])
    sets = []
    for r in range(1, len(used) + 1):
        for combo in itertools.combinations(used, r):
            if net.is_valid_activation(combo):
                sets.append(frozenset(combo))
    sets.sort(key=lambda s: sorted(net.index[e] for e in s))
    total = sum(len(sets) ** K for K in range(1, K_max + 1))
    if total > cap:
        raise OracleCapError(f"{total} candidate schedules exceed the cap of {cap}")
    for K in range(1, K_max + 1):
        for combo in itertools.product(sets, repeat=K):
            sched = CyclicSchedule(combo)
            if not all(sched.count(e) for e in used):
                continue
            if any(f.lam > sched.rate(e) * slices.get(f.id, e) for f in flows for e in f.route):
                continue
            report = simulate(net, flows, slices, sched, default_horizon(sched, flows))
            if report.supports and report.steady_state is not None:
                return sched
    return None
