"""Cyclic schedules, inter-scheduling statistics and reference constructions."""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Hashable, Iterable, Mapping, Sequence

from .model import Network, SliceSchedError

REGULAR = "regular"
ALMOST_REGULAR = "almost_regular"
IRREGULAR = "irregular"


@dataclass(frozen=True)
class CyclicSchedule:
    """Period-K sequence of activation sets, repeated forever.

    Items are usually link ids; schedules over matchings use matching
    indices instead. Empty slots are allowed.
    """

    slots: tuple[frozenset, ...]

    def __post_init__(self):
        slots = tuple(frozenset(s) for s in self.slots)
        if not slots:
            raise SliceSchedError("a schedule needs at least one slot")
        object.__setattr__(self, "slots", slots)

    @classmethod
    def from_lists(cls, slots: Iterable[Iterable[Hashable]]) -> "CyclicSchedule":
        return cls(tuple(frozenset(s) for s in slots))

    @property
    def K(self) -> int:
        return len(self.slots)

    def active(self, t: int) -> frozenset:
        return self.slots[t % self.K]

    @cached_property
    def activation_times(self) -> dict[Hashable, tuple[int, ...]]:
        times: dict[Hashable, list[int]] = {}
        for t, slot in enumerate(self.slots):
            for e in slot:
                times.setdefault(e, []).append(t)
        return {e: tuple(ts) for e, ts in times.items()}

    @property
    def items(self) -> frozenset:
        return frozenset(self.activation_times)

    def count(self, e) -> int:
        """Activations per period (eta)."""
        return len(self.activation_times.get(e, ()))

    def rate(self, e) -> Fraction:
        """Activation frequency eta / K."""
        return Fraction(self.count(e), self.K)

    def validate(self, net: Network) -> None:
        for t, slot in enumerate(self.slots):
            if not net.is_valid_activation(slot):
                raise SliceSchedError(f"slot {t} is not a valid activation: {sorted(slot)}")

    def rotate(self, shift: int) -> "CyclicSchedule":
        shift %= self.K
        return CyclicSchedule(self.slots[shift:] + self.slots[:shift])

    def expand(self, groups: Sequence[Iterable[Hashable]]) -> "CyclicSchedule":
        """Replace every item ``m`` by the members of ``groups[m]``."""
        return CyclicSchedule(
            tuple(frozenset(e for m in slot for e in groups[m]) for slot in self.slots)
        )

    # -- serialization ---------------------------------------------------
    def to_json(self) -> dict:
        return {"K": self.K, "slots": [sorted(s, key=str) for s in self.slots]}

    @classmethod
    def from_json(cls, doc: Mapping) -> "CyclicSchedule":
        sched = cls.from_lists(doc["slots"])
        if "K" in doc and int(doc["K"]) != sched.K:
            raise SliceSchedError("K does not match the number of slots")
        return sched

    @classmethod
    def load(cls, path) -> "CyclicSchedule":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n", encoding="utf-8")

    def to_line(self, one_based: bool = True) -> str:
        """Render a one-matching-per-slot schedule as ``"1 2 4 1 3"``; empty slots as ``_``."""
        parts = []
        for slot in self.slots:
            if not slot:
                parts.append("_")
            elif len(slot) == 1:
                (m,) = slot
                parts.append(str(m + 1 if one_based else m))
            else:
                raise SliceSchedError("to_line needs at most one item per slot")
        return " ".join(parts)

    @classmethod
    def from_line(cls, text: str, one_based: bool = True) -> "CyclicSchedule":
        slots = []
        for tok in text.split():
            if tok == "_":
                slots.append(frozenset())
            else:
                slots.append(frozenset({int(tok) - 1 if one_based else int(tok)}))
        return cls(tuple(slots))


@dataclass(frozen=True)
class InterSchedulingStats:
    k_min: dict
    k_max: dict
    pair_min: dict
    pair_max: dict


def _gaps(times: Sequence[int], K: int) -> list[int]:
    if len(times) == 1:
        return [K]
    return [(times[(i + 1) % len(times)] - times[i]) % K or K for i in range(len(times))]


def _pair_gaps(src: Sequence[int], dst: Sequence[int], K: int) -> list[int]:
    out = []
    for t in src:
        # smallest strictly-later activation of dst, cyclically
        out.append(min((u - t) % K or K for u in dst))
    return out


def inter_scheduling_stats(sched: CyclicSchedule, route: Sequence | None = None) -> InterSchedulingStats:
    """Cyclic min/max gaps per scheduled link and per consecutive route pair."""
    K = sched.K
    times = sched.activation_times
    if route is not None:
        for e in route:
            if e not in times:
                raise SliceSchedError(f"link {e!r} is never scheduled")
    k_min, k_max = {}, {}
    for e, ts in times.items():
        gaps = _gaps(ts, K)
        k_min[e], k_max[e] = min(gaps), max(gaps)
    pair_min, pair_max = {}, {}
    if route is not None:
        for a, b in zip(route, route[1:]):
            gaps = _pair_gaps(times[a], times[b], K)
            pair_min[(a, b)], pair_max[(a, b)] = min(gaps), max(gaps)
    return InterSchedulingStats(k_min, k_max, pair_min, pair_max)


def classify_regularity(sched: CyclicSchedule) -> str:
    stats = inter_scheduling_stats(sched)
    spread = max((stats.k_max[e] - stats.k_min[e] for e in stats.k_min), default=0)
    if spread == 0:
        return REGULAR
    if spread <= 1:
        return ALMOST_REGULAR
    return IRREGULAR


def build_orr(route: Sequence[str], phi: int, clamp: bool = True) -> CyclicSchedule:
    """Ordered round-robin: slot t activates hops t, t+phi+1, t+2(phi+1), ...

    With ``clamp`` (default) a route no longer than ``phi`` is treated as
    total interference, i.e. phi becomes ``len(route) - 1``. Without it the
    period stays ``phi + 1`` and the trailing slots are empty.
    """
    route = tuple(route)
    if not route:
        raise SliceSchedError("empty route")
    if phi < 0:
        raise SliceSchedError("phi must be non-negative")
    if clamp and len(route) <= phi:
        phi = len(route) - 1
    period = phi + 1
    return CyclicSchedule(
        tuple(frozenset(route[j] for j in range(t, len(route), period)) for t in range(period))
    )


def build_block_schedule(route: Sequence[str], eta: Sequence[int], K: int) -> CyclicSchedule:
    """Contiguous blocks, last hop first: each link's block starts right after its successor's."""
    route = tuple(route)
    if len(eta) != len(route):
        raise SliceSchedError("need one activation count per route link")
    if any(n < 1 for n in eta):
        raise SliceSchedError("activation counts must be positive")
    if sum(eta) > K:
        raise SliceSchedError(f"activation counts sum to {sum(eta)} > K={K}")
    slots = []
    for e, n in reversed(list(zip(route, eta))):
        slots.extend([frozenset({e})] * n)
    slots.extend([frozenset()] * (K - len(slots)))
    return CyclicSchedule(tuple(slots))
