"""Deterministic slot-level fluid simulation of sliced FCFS queues.

Within a slot the order is: arrivals (and mass forwarded during the previous
slot) join their queues, queue sizes are recorded, then every active link
serves up to its slice width from each of its slice queues. Mass served at
an intermediate hop joins the next queue at the start of the following slot;
mass served at the last hop is delivered with delay ``t - arrival + 1``.

Masses are kept as integers in units of ``1/scale`` where ``scale`` is the
least common multiple of all rate and width denominators, so every
comparison is exact.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .model import Flow, Network, SliceAllocation, SliceSchedError
from .schedule import CyclicSchedule, inter_scheduling_stats


@dataclass
class FlowStats:
    max_delay: int = 0
    arrived: Fraction = Fraction(0)
    delivered: Fraction = Fraction(0)
    expired: Fraction = Fraction(0)
    residual: Fraction = Fraction(0)
    max_queue_sum: Fraction = Fraction(0)
    queue_sum_ok: bool = True


@dataclass
class SimReport:
    horizon: int
    K: int
    scale: int
    slots_run: int
    flows: dict[str, FlowStats]
    trace_units: dict[tuple[str, str], list[int]] = field(repr=False)
    supports: bool = True
    conservation_ok: bool = True
    deficit_violations: int = 0
    max_deficit: dict[str, int] = field(default_factory=dict)
    steady_state: tuple[int, int] | None = None

    def queue(self, flow_id: str, link_id: str, t: int) -> Fraction:
        return Fraction(self.trace_units[(flow_id, link_id)][t], self.scale)

    def route_queue_sums(self, flow: Flow) -> list[Fraction]:
        traces = [self.trace_units[(flow.id, e)] for e in flow.route]
        return [Fraction(sum(col), self.scale) for col in zip(*traces)]

    @property
    def max_delay(self) -> int:
        return max((s.max_delay for s in self.flows.values()), default=0)

    def to_json(self) -> dict:
        return {
            "horizon": self.horizon,
            "K": self.K,
            "slots_run": self.slots_run,
            "supports": self.supports,
            "conservation_ok": self.conservation_ok,
            "deficit_violations": self.deficit_violations,
            "steady_state": list(self.steady_state) if self.steady_state else None,
            "flows": {
                fid: {
                    "max_delay": s.max_delay,
                    "arrived": str(s.arrived),
                    "delivered": str(s.delivered),
                    "expired": str(s.expired),
                    "residual": str(s.residual),
                    "max_queue_sum": str(s.max_queue_sum),
                    "queue_sum_ok": s.queue_sum_ok,
                }
                for fid, s in self.flows.items()
            },
        }

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "flow", "link", "queue_mass"])
            for t in range(self.slots_run):
                for (fid, e), units in self.trace_units.items():
                    writer.writerow([t, fid, e, str(Fraction(units[t], self.scale))])


# callables invoked with every finished report (used by the test suite)
observers: list = []


def _lcm_denominators(values: Iterable[Fraction]) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, v.denominator)
    return out


def default_horizon(sched: CyclicSchedule, flows: Sequence[Flow]) -> int:
    """Whole number of periods covering at least 4K and twice the largest deadline."""
    K = sched.K
    need = max(4 * K, 2 * max((f.tau for f in flows), default=1) + 2 * K)
    return K * math.ceil(need / K)


def simulate(
    net: Network,
    flows: Sequence[Flow],
    slices: SliceAllocation,
    sched: CyclicSchedule,
    horizon: int,
) -> SimReport:
    """Run arrivals for ``horizon`` slots, then drain without new arrivals."""
    K = sched.K
    if horizon < 3 * K:
        raise SliceSchedError(f"horizon {horizon} < 3K = {3 * K}")
    flows = list(flows)
    stats = inter_scheduling_stats(sched)
    for f in flows:
        for e in f.route:
            net.link(e)
            if sched.count(e) == 0:
                raise SliceSchedError(f"route link {e!r} of flow {f.id!r} is never scheduled")

    scale = _lcm_denominators([f.lam for f in flows] + list(slices.widths.values()))
    lam = [int(f.lam * scale) for f in flows]
    widths = [[int(slices.get(f.id, e) * scale) for e in f.route] for f in flows]
    # deficit quota through hop h inclusive: sum of k_max over route[0..h]
    quota_prefix = []
    for f in flows:
        acc, pref = 0, []
        for e in f.route:
            acc += stats.k_max[e]
            pref.append(acc)
        quota_prefix.append(pref)

    # link -> list of (flow index, hop)
    on_link: dict[str, list[tuple[int, int]]] = {}
    for i, f in enumerate(flows):
        for h, e in enumerate(f.route):
            on_link.setdefault(e, []).append((i, h))
    active_slices = [
        [s for e in sorted(slot, key=str) for s in on_link.get(e, ())] for slot in sched.slots
    ]

    queues = [[deque() for _ in f.route] for f in flows]
    qsize = [[0] * len(f.route) for f in flows]
    traces = [[[] for _ in f.route] for f in flows]
    pending: list[tuple[int, int, int, int]] = []
    arrived = [0] * len(flows)
    delivered = [0] * len(flows)
    late = [0] * len(flows)
    max_delay = [0] * len(flows)
    max_qsum = [0] * len(flows)
    qsum_ok = [True] * len(flows)
    max_def = [-(10**18)] * len(flows)
    violations = 0
    conservation_ok = True
    taus = [f.tau for f in flows]
    hops = [len(f.route) for f in flows]

    t = 0
    while True:
        if t < horizon:
            for i in range(len(flows)):
                if lam[i]:
                    queues[i][0].append([t, lam[i]])
                    qsize[i][0] += lam[i]
                    arrived[i] += lam[i]
        elif not pending and not any(any(q) for q in qsize):
            break
        for i, h, a, m in pending:
            q = queues[i][h]
            if q and q[-1][0] == a:
                q[-1][1] += m
            else:
                q.append([a, m])
            qsize[i][h] += m
        pending = []

        for i in range(len(flows)):
            s = 0
            for h in range(hops[i]):
                traces[i][h].append(qsize[i][h])
                s += qsize[i][h]
            if s > max_qsum[i]:
                max_qsum[i] = s
            # after the horizon, count the arrivals that would have kept coming;
            # under FCFS they queue behind everything already in the system and
            # none leave before it does, so the sum is exact until the flow empties
            if t >= horizon and s == 0:
                continue
            virtual = lam[i] * (t - horizon + 1) if t >= horizon else 0
            if s + virtual > lam[i] * taus[i]:
                qsum_ok[i] = False

        for i, h in active_slices[t % K]:
            budget = widths[i][h]
            q = queues[i][h]
            last = h == hops[i] - 1
            while budget and q:
                a, m = q[0]
                take = m if m <= budget else budget
                if take == m:
                    q.popleft()
                else:
                    q[0][1] -= take
                budget -= take
                qsize[i][h] -= take
                if last:
                    delay = t - a + 1
                    if delay > max_delay[i]:
                        max_delay[i] = delay
                    if delay <= taus[i]:
                        delivered[i] += take
                    else:
                        late[i] += take
                    deficit = delay - quota_prefix[i][h]
                else:
                    pending.append((i, h + 1, a, take))
                    deficit = (t + 1 - a) - quota_prefix[i][h]
                if deficit > max_def[i]:
                    max_def[i] = deficit
                if deficit > 0:
                    violations += 1

        in_flight = [0] * len(flows)
        for i, _, _, m in pending:
            in_flight[i] += m
        for i in range(len(flows)):
            if arrived[i] != delivered[i] + late[i] + sum(qsize[i]) + in_flight[i]:
                conservation_ok = False

        t += 1
        if t >= horizon:
            # during the drain, stop once something can no longer make its deadline
            overdue = any(
                q[0][0] + taus[i] <= t
                for i in range(len(flows))
                for q in queues[i]
                if q
            ) or any(a + taus[i] <= t for i, _, a, _ in pending)
            if overdue:
                # the slot-t measurement that would have caught it
                for i in range(len(flows)):
                    s = sum(qsize[i]) + sum(m for j, _, _, m in pending if j == i)
                    if s and s + lam[i] * (t - horizon + 1) > lam[i] * taus[i]:
                        qsum_ok[i] = False
                break

    report_flows: dict[str, FlowStats] = {}
    supports = True
    for i, f in enumerate(flows):
        overdue_units = 0
        residual_units = 0
        for q in queues[i]:
            for a, m in q:
                if a + taus[i] <= t:
                    overdue_units += m
                else:
                    residual_units += m
        for j, _, a, m in pending:
            if j == i:
                if a + taus[i] <= t:
                    overdue_units += m
                else:
                    residual_units += m
        expired = late[i] + overdue_units
        if expired:
            supports = False
        report_flows[f.id] = FlowStats(
            max_delay=max_delay[i],
            arrived=Fraction(arrived[i], scale),
            delivered=Fraction(delivered[i], scale),
            expired=Fraction(expired, scale),
            residual=Fraction(residual_units, scale),
            max_queue_sum=Fraction(max_qsum[i], scale),
            queue_sum_ok=qsum_ok[i],
        )
    report = SimReport(
        horizon=horizon,
        K=K,
        scale=scale,
        slots_run=t,
        flows=report_flows,
        trace_units={(f.id, e): traces[i][h] for i, f in enumerate(flows) for h, e in enumerate(f.route)},
        supports=supports,
        conservation_ok=conservation_ok,
        deficit_violations=violations,
        max_deficit={f.id: max_def[i] for i, f in enumerate(flows)},
    )
    report.steady_state = detect_steady_state(report)
    for fn in observers:
        fn(report)
    return report


def detect_steady_state(report: SimReport) -> tuple[int, int] | None:
    """Smallest ``(t0, p)`` with the queue vector at t equal to t+p for t0 <= t <= t0+p.

    Only the arrival phase is searched. ``p = 1`` is tried first (constant
    traces), then multiples of the schedule period.
    """
    T = min(report.horizon, report.slots_run)
    keys = list(report.trace_units)
    if not keys:
        return (0, 1)
    ids: dict[tuple, int] = {}
    states = []
    columns = [report.trace_units[k] for k in keys]
    for t in range(T):
        states.append(ids.setdefault(tuple(c[t] for c in columns), len(ids)))
    best = None
    periods = [1] + list(range(report.K, T, report.K))
    for p in periods:
        if 2 * p > T - 1:
            break
        run = 0
        for t in range(T - p):
            if states[t] == states[t + p]:
                run += 1
                if run == p + 1:
                    t0 = t - p
                    if best is None or t0 < best[0]:
                        best = (t0, p)
                    break
            else:
                run = 0
        if best is not None and best[0] == 0:
            break
    return best


@dataclass(frozen=True)
class DeficitVerdict:
    precondition_met: bool
    bounds: dict[str, int]
    measured: dict[str, int]
    violations: int

    @property
    def holds(self) -> bool:
        return (
            self.precondition_met
            and self.violations == 0
            and all(self.measured[f] <= self.bounds[f] for f in self.bounds)
        )

    @property
    def status(self) -> str:
        if not self.precondition_met:
            return "precondition unmet"
        return "holds" if self.holds else "violated"


def check_deficit_bound(
    net: Network,
    flows: Sequence[Flow],
    slices: SliceAllocation,
    sched: CyclicSchedule,
    report: SimReport,
) -> DeficitVerdict:
    """Compare measured delays with the sum of max inter-scheduling times."""
    stats = inter_scheduling_stats(sched)
    met = all(slices.get(f.id, e) >= f.lam * stats.k_max[e] for f in flows for e in f.route)
    bounds = {f.id: sum(stats.k_max[e] for e in f.route) for f in flows}
    measured = {f.id: report.flows[f.id].max_delay for f in flows}
    return DeficitVerdict(met, bounds, measured, report.deficit_violations)
