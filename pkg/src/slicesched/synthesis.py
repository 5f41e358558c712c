"""Almost-regular schedule construction and the contiguous-block baseline.

Pipeline: initial link rates from a convex program, greedy unique-edge
matchings, power-of-two period rounding into a step-down rate vector,
placement of the matchings into an elongated regular schedule with the
unused slots squeezed out, then slices of ``lambda * k_e``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from scipy.optimize import brentq

from .model import (
    CapacityError,
    Flow,
    InfeasibleError,
    Network,
    SliceAllocation,
    SliceSchedError,
    as_fraction,
    format_fraction,
)
from .schedule import CyclicSchedule, classify_regularity, inter_scheduling_stats
from .simulator import SimReport, default_horizon, simulate

log = logging.getLogger(__name__)


class SynthesisError(RuntimeError):
    """A construction step broke one of its own guarantees."""


# -- initial rates -----------------------------------------------------------


@dataclass(frozen=True)
class InitialRates:
    rates: dict[str, Fraction]
    k: dict[str, float]
    iterations: int

    @property
    def total(self) -> Fraction:
        return sum(self.rates.values(), Fraction(0))


def _used_links(net: Network, flows: Sequence[Flow]) -> list[str]:
    used = {e for f in flows for e in f.route}
    return [e for e in net.link_ids if e in used]


def solve_initial_rates(
    net: Network,
    flows: Sequence[Flow],
    tol: float = 1e-9,
    max_denominator: int = 10**6,
    max_sweeps: int = 100_000,
) -> InitialRates:
    """Minimize the sum of link rates subject to deadline and capacity budgets.

    Solved over periods ``k_e = 1/mu_e``: minimize sum 1/k_e with
    ``sum_{route}(k_e + 1) <= tau`` per flow and
    ``1 <= k_e <= c_e / load_e - 1`` per link. Gauss-Seidel dual ascent on
    the flow multipliers; the inner minimizer is
    ``k_e = clamp(theta_e ** -0.5, 1, ub_e)``.
    """
    links = _used_links(net, flows)
    if not links:
        return InitialRates({}, {}, 0)
    load = {e: Fraction(0) for e in links}
    for f in flows:
        for e in f.route:
            load[e] += f.lam
    budget = []
    for f in flows:
        b = f.tau - f.hops
        if b < f.hops:
            raise InfeasibleError(
                f"flow {f.id!r}: tau={f.tau} < 2*|route|={2 * f.hops} leaves no room for any schedule"
            )
        budget.append(b)
    ub = {}
    for e in links:
        cap_box = math.inf if load[e] == 0 else float(net.capacity(e) / load[e]) - 1.0
        if cap_box < 1.0:
            raise InfeasibleError(f"link {e!r}: capacity {net.capacity(e)} cannot carry load {load[e]} with k >= 1")
        implied = min(budget[i] - (f.hops - 1) for i, f in enumerate(flows) if e in f.route)
        ub[e] = min(cap_box, float(implied))

    members = [list(f.route) for f in flows]
    theta = [0.0] * len(flows)
    through = {e: [i for i, f in enumerate(flows) if e in f.route] for e in links}

    def k_of(e: str, total: float) -> float:
        if total <= 0.0:
            return ub[e]
        return min(max(total**-0.5, 1.0), ub[e])

    def theta_sum(e: str) -> float:
        return sum(theta[i] for i in through[e])

    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        for i in range(len(flows)):
            rest = {e: theta_sum(e) - theta[i] for e in members[i]}

            def slack(th: float) -> float:
                return sum(k_of(e, rest[e] + th) for e in members[i]) - budget[i]

            if slack(0.0) <= 0.0:
                theta[i] = 0.0
                continue
            hi = 1.0
            while slack(hi) > 0.0:
                hi *= 4.0
            theta[i] = brentq(slack, 0.0, hi, xtol=1e-300, rtol=4 * 2.0**-52, maxiter=500)
        k = {e: k_of(e, theta_sum(e)) for e in links}
        worst = max(sum(k[e] for e in members[i]) - budget[i] for i in range(len(flows)))
        if worst < tol:
            break
    else:
        raise SynthesisError("dual ascent did not converge")

    rates = {}
    for e in links:
        mu = Fraction(1.0 / k[e]).limit_denominator(max_denominator)
        rates[e] = min(max(mu, Fraction(1, max_denominator)), Fraction(1))
    return InitialRates(rates, k, sweeps)


# -- greedy matching ---------------------------------------------------------


def greedy_matching(net: Network, rates: dict[str, Fraction]) -> tuple[list[tuple[str, ...]], list[Fraction]]:
    """Greedy unique-edge matchings seeded in decreasing rate order (ties by link index)."""
    order = sorted(rates, key=lambda e: (-as_fraction(rates[e]), net.index[e]))
    for e in order:
        r = as_fraction(rates[e])
        if not 0 < r <= 1:
            raise SliceSchedError(f"rate of {e!r} must lie in (0, 1]")
    remaining = list(order)
    matchings, mrates = [], []
    while remaining:
        seed = remaining.pop(0)
        m = [seed]
        rest = []
        for e in remaining:
            if all(net.compatible(e, x) for x in m):
                m.append(e)
            else:
                rest.append(e)
        remaining = rest
        matchings.append(tuple(m))
        mrates.append(as_fraction(rates[seed]))
    return matchings, mrates


# -- step-down augmentation --------------------------------------------------


def _floor_log2(r: Fraction) -> int:
    j = r.numerator.bit_length() - r.denominator.bit_length()
    while Fraction(2) ** j > r:
        j -= 1
    while Fraction(2) ** (j + 1) <= r:
        j += 1
    return j


def is_step_down(rates: Sequence[Fraction]) -> bool:
    for a, b in zip(rates, rates[1:]):
        q = Fraction(a) / Fraction(b)
        if b <= 0 or q.denominator != 1 or q < 1:
            return False
    return all(r > 0 for r in rates)


@dataclass(frozen=True)
class StepDownRates:
    base: Fraction
    exponents: tuple[int, ...]

    @property
    def periods(self) -> tuple[Fraction, ...]:
        return tuple(self.base * Fraction(2) ** j for j in self.exponents)

    @property
    def rates(self) -> tuple[Fraction, ...]:
        return tuple(1 / p for p in self.periods)

    @property
    def total(self) -> Fraction:
        return sum(self.rates, Fraction(0))


def augment_step_down(rates: Sequence) -> StepDownRates:
    """Round every period down onto a grid ``x * 2**j``, choosing the base x with the smallest total.

    The minimum over x is attained at a base where some period lies exactly
    on the grid, so only those critical bases are tried.
    """
    rates = [as_fraction(r) for r in rates]
    if not rates:
        raise SliceSchedError("no rates")
    if any(not 0 < r <= 1 for r in rates):
        raise SliceSchedError("rates must lie in (0, 1]")
    if any(a < b for a, b in zip(rates, rates[1:])):
        raise SliceSchedError("rates must be sorted in decreasing order")
    periods = [1 / r for r in rates]
    bases = set()
    for p in periods:
        j = _floor_log2(p)
        x = p / Fraction(2) ** j  # in [1, 2)
        bases.add(x * 2 if x == 1 else x)
    best = None
    for x in sorted(bases):
        exps = tuple(_floor_log2(p / x) for p in periods)
        cand = StepDownRates(x, exps)
        if best is None or cand.total < best.total:
            best = cand
    assert all(a >= b for a, b in zip(best.rates, rates))
    assert is_step_down(best.rates)
    return best


def normalize(rates: Sequence[Fraction]) -> tuple[Fraction, ...]:
    total = sum(rates, Fraction(0))
    return tuple(Fraction(r) / total for r in rates)


# -- almost-regular placement ------------------------------------------------


def _lag_from(slots: list, owner: int) -> list[int]:
    """For every slot, distance back to the most recent earlier slot held by ``owner`` (cyclic)."""
    n = len(slots)
    last = None
    for t in range(n):
        if slots[t] == owner:
            last = t - n
    out = [0] * n
    for t in range(n):
        out[t] = t - last
        if slots[t] == owner:
            last = t
    return out


def construct_almost_regular(rates: Sequence) -> CyclicSchedule:
    """Place matchings 0..M-1 with the given normalized step-down rates.

    Returns a schedule over matching indices whose period is ``1/rates[-1]``.
    """
    rates = [as_fraction(r) for r in rates]
    if sum(rates) != 1:
        raise SliceSchedError("rates must sum to exactly 1")
    if not is_step_down(rates):
        raise SliceSchedError("rates must form a step-down vector")
    K = 1 / rates[-1]
    if K.denominator != 1:
        raise SynthesisError("schedule length is not an integer")
    K = int(K)
    eta = [int(r * K) for r in rates]
    k1 = math.ceil(1 / rates[0])
    K_long = k1 * eta[0]
    slots: list[int | None] = [None] * K_long
    for c in range(eta[0]):
        slots[c * k1] = 0
    for m in range(1, len(rates)):
        spacing, rem = divmod(K_long, eta[m])
        if rem:
            raise SynthesisError(f"matching {m}: spacing is not an integer")
        chi = [t for t in range(K_long) if slots[t] is None]
        for j in range(m):
            lag = _lag_from(slots, j)
            closest = min(lag[t] for t in chi)
            chi = [t for t in chi if lag[t] == closest]
        if not chi:
            raise SynthesisError(f"matching {m}: no candidate slot")
        start = chi[0]
        for c in range(eta[m]):
            t = start + c * spacing
            if slots[t] is not None:
                raise SynthesisError(f"matching {m} collides at slot {t}")
            slots[t] = m
    packed = [frozenset({m}) for m in slots if m is not None]
    if len(packed) != K:
        raise SynthesisError("compressed schedule has the wrong length")
    return CyclicSchedule(tuple(packed))


# -- end-to-end --------------------------------------------------------------


@dataclass
class SynthesisResult:
    schedule: CyclicSchedule
    slices: SliceAllocation
    k: dict[str, int]
    matchings: list[tuple[str, ...]] = field(default_factory=list)
    matching_rates: tuple[Fraction, ...] = ()
    matching_schedule: CyclicSchedule | None = None
    initial: InitialRates | None = None
    step_down: StepDownRates | None = None
    excess: dict[tuple[str, str], Fraction] = field(default_factory=dict)
    policy: str = "ARSC"
    report: SimReport | None = field(default=None, repr=False)

    def deadline_bound(self, flow: Flow) -> int:
        return sum(self.k[e] for e in flow.route)

    def to_json(self) -> dict:
        doc = {
            "policy": self.policy,
            "schedule": self.schedule.to_json(),
            "k": dict(sorted(self.k.items())),
            "slices": self.slices.to_json(),
            "diagnostics": {
                "excess_fraction": [
                    {"flow": i, "link": e, "value": format_fraction(v)}
                    for (i, e), v in sorted(self.excess.items())
                ],
            },
        }
        if self.matchings:
            doc["matchings"] = [list(m) for m in self.matchings]
            doc["matching_rates"] = [format_fraction(r) for r in self.matching_rates]
            doc["matching_schedule"] = self.matching_schedule.to_line()
            doc["regularity"] = classify_regularity(self.matching_schedule)
        if self.initial is not None:
            doc["diagnostics"]["initial_rates"] = {e: format_fraction(r) for e, r in self.initial.rates.items()}
        if self.step_down is not None:
            doc["diagnostics"]["augmented_total"] = format_fraction(self.step_down.total)
        return doc


def _excess_fractions(flows, sched, k, slices):
    out = {}
    for f in flows:
        for e in f.route:
            w = slices.get(f.id, e)
            if w:
                out[(f.id, e)] = f.lam * (k[e] - 1 / sched.rate(e)) / w
    return out


def arsc(net: Network, flows: Sequence[Flow], initial: InitialRates | None = None) -> SynthesisResult | None:
    """Almost-regular schedule plus slices meeting every (lambda, tau), or None at the rate gate.

    Raises :class:`InfeasibleError` when the initial-rate program has no solution.
    """
    flows = list(flows)
    if initial is None:
        initial = solve_initial_rates(net, flows)
    if not initial.rates:
        raise SliceSchedError("no flows to schedule")
    matchings, mrates = greedy_matching(net, initial.rates)
    step = augment_step_down(mrates)
    if step.total > 1:
        return None
    norm = normalize(step.rates)
    msched = construct_almost_regular(norm)
    sched = msched.expand(matchings)
    sched.validate(net)
    stats = inter_scheduling_stats(sched)
    k = {e: stats.k_max[e] for e in initial.rates}
    slices = SliceAllocation({(f.id, e): f.lam * k[e] for f in flows for e in f.route})
    for link in net.links:
        if slices.link_load(link.id) > link.capacity:
            raise SynthesisError(f"link {link.id!r} over capacity")
    for f in flows:
        if sum(k[e] for e in f.route) > f.tau:
            raise SynthesisError(f"flow {f.id!r}: deadline bound exceeds tau")
    return SynthesisResult(
        schedule=sched,
        slices=slices,
        k=k,
        matchings=matchings,
        matching_rates=norm,
        matching_schedule=msched,
        initial=initial,
        step_down=step,
        excess=_excess_fractions(flows, sched, k, slices),
    )


def cbh_baseline(
    net: Network,
    flows: Sequence[Flow],
    initial: InitialRates | None = None,
    max_period: int = 2_000,
) -> SynthesisResult | None:
    """Contiguous-block baseline: one block per link and period, resource-minimizing slices.

    Returns None when the period does not settle, capacities overflow, or the
    simulator sees an expired packet.
    """
    flows = list(flows)
    if initial is None:
        try:
            initial = solve_initial_rates(net, flows)
        except InfeasibleError:
            return None
    rates = initial.rates
    if not rates:
        return None
    order = []
    for f in flows:
        for e in f.route:
            if e not in order:
                order.append(e)

    def layout(K: int) -> list[set[str]]:
        slots: list[set[str]] = []
        blocked: list[set[str]] = []  # links that conflict with something in the slot
        for e in order:
            n = math.ceil(rates[e] * K)
            # first run of n consecutive slots that can take e
            start, run = 0, 0
            for t in range(len(slots)):
                if run == n:
                    break
                if e in blocked[t]:
                    start, run = t + 1, 0
                else:
                    run += 1
            while len(slots) < start + n:
                slots.append(set())
                blocked.append(set())
            for t in range(start, start + n):
                slots[t].add(e)
                blocked[t].add(e)
                blocked[t] |= net.conflicts[e]
        return slots

    if net.phi >= 1:
        # links at one node pairwise conflict, so their blocks can never overlap
        for v in net.nodes:
            star = [e for e in order if v in net.link(e).endpoints]
            if sum((rates[e] for e in star), Fraction(0)) > 1:
                return None
    # grow K until the reuse-aware layout fits inside it
    K = len(order)
    slots = layout(K)
    while len(slots) > K:
        K = len(slots)
        if K > max_period:
            return None
        slots = layout(K)
    sched = CyclicSchedule.from_lists(slots)
    sched.validate(net)
    widths = {(f.id, e): f.lam / sched.rate(e) for f in flows for e in f.route}
    slices = SliceAllocation(widths)
    try:
        slices.validate(net, flows)
    except CapacityError:
        return None
    report = simulate(net, flows, slices, sched, default_horizon(sched, flows))
    if not report.supports:
        return None
    stats = inter_scheduling_stats(sched)
    k = {e: stats.k_max[e] for e in order}
    return SynthesisResult(
        schedule=sched,
        slices=slices,
        k=k,
        initial=initial,
        excess=_excess_fractions(flows, sched, k, slices),
        policy="CBH",
        report=report,
    )
