"""Closed-form feasibility regions and delay bounds for a fixed route."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .model import CapacityError, Flow, Network, SliceAllocation, SliceSchedError, as_fraction
from .schedule import CyclicSchedule, inter_scheduling_stats


@dataclass(frozen=True)
class RegionPoint:
    tau: int | Fraction
    lam: Fraction


def _require_scheduled(sched: CyclicSchedule, route: Sequence[str]) -> None:
    for e in route:
        if sched.count(e) == 0:
            raise SliceSchedError(f"link {e!r} is never scheduled")


def max_supported_throughput(sched: CyclicSchedule, widths: Sequence, route: Sequence[str]) -> Fraction:
    """Largest arrival rate the schedule can carry: min over hops of rate * width."""
    _require_scheduled(sched, route)
    return min(sched.rate(e) * as_fraction(w) for e, w in zip(route, widths))


def tau_lower_bound(sched: CyclicSchedule, route: Sequence[str]) -> int:
    """(k_min of the source - 1) + sum of consecutive-pair minimum gaps + 1."""
    stats = inter_scheduling_stats(sched, route)
    return (stats.k_min[route[0]] - 1) + sum(stats.pair_min.values()) + 1


def region_no_interference(widths: Sequence) -> tuple[RegionPoint, RegionPoint]:
    w = [as_fraction(v) for v in widths]
    point = RegionPoint(len(w), min(w))
    return point, point


def harmonic_mean(values: Sequence) -> Fraction:
    values = [as_fraction(v) for v in values]
    return len(values) / sum(1 / v for v in values)


def region_total_interference(
    widths: Sequence,
) -> tuple[RegionPoint, Fraction, Callable[[Iterable, int], bool]]:
    """Deadline-optimal point, best throughput H(w)/|T| and the ceiling deadline test."""
    w = [as_fraction(v) for v in widths]
    if not w:
        raise SliceSchedError("empty route")
    n = len(w)
    h = harmonic_mean(w)
    tau_min = RegionPoint(2 * n - 1, min(w) / n)
    lam_max = h / n

    def meets_deadline(queue_sums: Iterable, tau: int) -> bool:
        return all(math.ceil(n / h * as_fraction(q)) <= tau for q in queue_sums)

    return tau_min, lam_max, meets_deadline


def pair_rates(w_a: Fraction, w_b: Fraction) -> tuple[Fraction, Fraction]:
    """Activation split of an adjacent pair that equalizes their service rates."""
    return w_b / (w_a + w_b), w_a / (w_a + w_b)


@dataclass(frozen=True)
class PrimaryRegion:
    tau_min: RegionPoint
    lam_star: Fraction
    activations: tuple[Fraction, ...]

    def lam_max(self, K: int) -> RegionPoint:
        """Throughput-optimal point with the worst-case delay for period ``K``."""
        tau = K * sum(1 - mu for mu in self.activations) + 1
        return RegionPoint(tau, self.lam_star)


def region_primary_interference(widths: Sequence) -> PrimaryRegion:
    w = [as_fraction(v) for v in widths]
    n = len(w)
    if n < 2:
        raise SliceSchedError("primary-interference region needs at least two hops")
    pairs = [pair_rates(w[j], w[j + 1]) for j in range(n - 1)]
    lam_star = min(w[j] * w[j + 1] / (w[j] + w[j + 1]) for j in range(n - 1))
    acts = []
    for j in range(n):
        options = []
        if j > 0:
            options.append(pairs[j - 1][1])
        if j < n - 1:
            options.append(pairs[j][0])
        acts.append(min(options))
    return PrimaryRegion(RegionPoint(n + 1, min(w) / 2), lam_star, tuple(acts))


def worst_case_delay_bound(sched: CyclicSchedule, route: Sequence[str]) -> int:
    """Worst-case delay over all orderings: K * sum(1 - rate) + 1."""
    _require_scheduled(sched, route)
    value = sched.K * sum(1 - sched.rate(e) for e in route) + 1
    return int(value)


def resource_minimizing_slices(
    net: Network, sched: CyclicSchedule, flows: Sequence[Flow]
) -> SliceAllocation:
    widths = {}
    for f in flows:
        _require_scheduled(sched, f.route)
        for e in f.route:
            widths[(f.id, e)] = f.lam / sched.rate(e)
    alloc = SliceAllocation(widths)
    for link in net.links:
        load = alloc.link_load(link.id)
        if load > link.capacity:
            raise CapacityError(f"link {link.id!r}: needs {load} > capacity {link.capacity}")
    return alloc


def delta_w(sched: CyclicSchedule, flow: Flow, link: str) -> Fraction:
    """Width needed beyond the resource-minimizing value for the deficit bound."""
    _require_scheduled(sched, [link])
    k_max = inter_scheduling_stats(sched).k_max[link]
    return flow.lam * (k_max - 1 / sched.rate(link))


def region_rows(widths: Sequence, K: int | None = None) -> list[tuple[str, Fraction | None, Fraction]]:
    """Endpoint rows ``(model, tau, lambda)`` for plotting the three regions.

    The throughput-optimal delay under total interference has no closed
    form, so that row carries ``tau=None``.
    """
    w = [as_fraction(v) for v in widths]
    rows = []
    p0, _ = region_no_interference(w)
    rows.append(("none", Fraction(p0.tau), p0.lam))
    tmin, lam_max, _ = region_total_interference(w)
    rows.append(("total", Fraction(tmin.tau), tmin.lam))
    rows.append(("total", None, lam_max))
    if len(w) >= 2:
        reg = region_primary_interference(w)
        rows.append(("primary", Fraction(reg.tau_min.tau), reg.tau_min.lam))
        if K is not None:
            pt = reg.lam_max(K)
            rows.append(("primary", Fraction(pt.tau), pt.lam))
    return rows


def write_region_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "tau", "lambda"])
        for model, tau, lam in rows:
            writer.writerow([model, "" if tau is None else str(tau), str(lam)])
