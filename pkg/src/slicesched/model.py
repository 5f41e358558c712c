"""Network, flow and slice data model.

All rates, capacities and slice widths are exact :class:`fractions.Fraction`
values. Links are directed; interference is evaluated on the undirected
support graph, so a link and its reverse always share both endpoints.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping

import networkx as nx


class SliceSchedError(ValueError):
    """Base error for invalid inputs."""


class InfeasibleError(SliceSchedError):
    """Raised when a requested guarantee cannot be met."""


class CapacityError(SliceSchedError):
    """Raised when slices overflow a link capacity."""


def as_fraction(value) -> Fraction:
    """Convert ints, floats, ``"p/q"`` strings and Fractions exactly."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # repr gives the shortest decimal that round-trips, e.g. 0.4 -> 2/5
        return Fraction(repr(value))
    return Fraction(value)


def format_fraction(value: Fraction) -> str:
    value = as_fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Link:
    id: str
    tail: str
    head: str
    capacity: Fraction = Fraction(1)

    def __post_init__(self):
        object.__setattr__(self, "capacity", as_fraction(self.capacity))
        if self.tail == self.head:
            raise SliceSchedError(f"link {self.id!r} is a self-loop")
        if self.capacity <= 0:
            raise SliceSchedError(f"link {self.id!r} has non-positive capacity")

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.tail, self.head)


@dataclass(frozen=True)
class Network:
    """Directed graph with link capacities and a phi-hop interference model.

    ``phi == 0`` means no interference and ``phi == len(links) - 1`` means
    total interference (every distinct pair conflicts, even across
    components).
    """

    nodes: tuple[str, ...]
    links: tuple[Link, ...]
    phi: int = 1

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        node_set = set(self.nodes)
        if len(node_set) != len(self.nodes):
            raise SliceSchedError("duplicate node ids")
        seen = set()
        for link in self.links:
            if link.id in seen:
                raise SliceSchedError(f"duplicate link id {link.id!r}")
            seen.add(link.id)
            if link.tail not in node_set or link.head not in node_set:
                raise SliceSchedError(f"link {link.id!r} references an unknown node")
        if not isinstance(self.phi, int) or self.phi < 0:
            raise SliceSchedError("phi must be a non-negative integer")
        if self.links and self.phi > len(self.links) - 1:
            raise SliceSchedError(f"phi={self.phi} exceeds |E|-1={len(self.links) - 1}")

    # -- lookup ----------------------------------------------------------
    @cached_property
    def _by_id(self) -> dict[str, Link]:
        return {link.id: link for link in self.links}

    @cached_property
    def index(self) -> dict[str, int]:
        """Stable position of every link id."""
        return {link.id: i for i, link in enumerate(self.links)}

    def link(self, link_id: str) -> Link:
        try:
            return self._by_id[link_id]
        except KeyError:
            raise SliceSchedError(f"unknown link id {link_id!r}") from None

    def capacity(self, link_id: str) -> Fraction:
        return self.link(link_id).capacity

    @property
    def link_ids(self) -> tuple[str, ...]:
        return tuple(link.id for link in self.links)

    @property
    def is_total_interference(self) -> bool:
        return len(self.links) >= 2 and self.phi == len(self.links) - 1

    # -- interference ----------------------------------------------------
    @cached_property
    def support_graph(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(link.endpoints for link in self.links)
        return g

    @cached_property
    def _distances(self) -> dict[str, dict[str, int]]:
        return dict(nx.all_pairs_shortest_path_length(self.support_graph))

    def link_separation(self, e: str, e2: str) -> float:
        """Hop separation between two distinct links.

        Minimum undirected distance between any endpoint of ``e`` and any
        endpoint of ``e2``; links in different components are infinitely
        separated.
        """
        a, b = self.link(e), self.link(e2)
        if e == e2:
            raise SliceSchedError("separation of a link with itself is undefined")
        best = float("inf")
        for u in a.endpoints:
            row = self._distances[u]
            for v in b.endpoints:
                if v in row and row[v] < best:
                    best = row[v]
        return best

    @cached_property
    def conflicts(self) -> dict[str, frozenset[str]]:
        """Symmetric conflict relation: link id -> ids it cannot share a slot with."""
        out: dict[str, set[str]] = {link.id: set() for link in self.links}
        total = self.is_total_interference
        for a, b in combinations(self.link_ids, 2):
            if total or self.link_separation(a, b) < self.phi:
                out[a].add(b)
                out[b].add(a)
        return {k: frozenset(v) for k, v in out.items()}

    def compatible(self, a: str, b: str) -> bool:
        return b not in self.conflicts[a]

    def is_valid_activation(self, links: Iterable[str]) -> bool:
        links = list(links)
        for e in links:
            self.link(e)
        for a, b in combinations(links, 2):
            if a == b or b in self.conflicts[a]:
                return False
        return True

    def max_degree(self) -> int:
        """Largest number of links incident to a node (directions counted)."""
        deg = {v: 0 for v in self.nodes}
        for link in self.links:
            deg[link.tail] += 1
            deg[link.head] += 1
        return max(deg.values(), default=0)

    # -- routing ---------------------------------------------------------
    def shortest_path_route(self, src: str, dst: str) -> tuple[str, ...]:
        """Minimum-hop directed route, ties broken by smallest link-index sequence."""
        if src not in self.nodes or dst not in self.nodes:
            raise SliceSchedError("unknown endpoint")
        if src == dst:
            raise SliceSchedError("source equals destination; empty routes are not allowed")
        incoming: dict[str, list[Link]] = {v: [] for v in self.nodes}
        outgoing: dict[str, list[Link]] = {v: [] for v in self.nodes}
        for link in self.links:
            incoming[link.head].append(link)
            outgoing[link.tail].append(link)
        dist = {dst: 0}
        queue = deque([dst])
        while queue:
            v = queue.popleft()
            for link in incoming[v]:
                if link.tail not in dist:
                    dist[link.tail] = dist[v] + 1
                    queue.append(link.tail)
        if src not in dist:
            raise SliceSchedError(f"{dst!r} is unreachable from {src!r}")
        route = []
        v = src
        while v != dst:
            nxt = min(
                (l for l in outgoing[v] if dist.get(l.head) == dist[v] - 1),
                key=lambda l: self.index[l.id],
            )
            route.append(nxt.id)
            v = nxt.head
        return tuple(route)


@dataclass(frozen=True)
class Flow:
    id: str
    src: str
    dst: str
    lam: Fraction
    tau: int
    route: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "lam", as_fraction(self.lam))
        object.__setattr__(self, "route", tuple(self.route))
        if self.lam < 0:
            raise SliceSchedError(f"flow {self.id!r}: negative arrival rate")
        if int(self.tau) != self.tau or self.tau < 1:
            raise SliceSchedError(f"flow {self.id!r}: deadline must be a positive integer")
        object.__setattr__(self, "tau", int(self.tau))
        if not self.route:
            raise SliceSchedError(f"flow {self.id!r}: empty route")

    @property
    def hops(self) -> int:
        return len(self.route)

    def validate(self, net: Network) -> None:
        node = self.src
        for e in self.route:
            link = net.link(e)
            if link.tail != node:
                raise SliceSchedError(f"flow {self.id!r}: route is not a connected path at {e!r}")
            node = link.head
        if node != self.dst:
            raise SliceSchedError(f"flow {self.id!r}: route does not end at {self.dst!r}")
        if len(set(self.route)) != len(self.route):
            raise SliceSchedError(f"flow {self.id!r}: route repeats a link")
        if self.tau < len(self.route):
            raise SliceSchedError(f"flow {self.id!r}: tau={self.tau} is below the hop count")


@dataclass(frozen=True)
class SliceAllocation:
    """Per-(flow, link) reserved capacity."""

    widths: Mapping[tuple[str, str], Fraction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "widths", {k: as_fraction(v) for k, v in dict(self.widths).items()}
        )

    def __getitem__(self, key: tuple[str, str]) -> Fraction:
        return self.widths[key]

    def get(self, flow_id: str, link_id: str) -> Fraction:
        return self.widths[(flow_id, link_id)]

    def link_load(self, link_id: str) -> Fraction:
        return sum((w for (_, e), w in self.widths.items() if e == link_id), Fraction(0))

    def validate(self, net: Network, flows: Iterable[Flow]) -> None:
        expected = {(f.id, e) for f in flows for e in f.route}
        if set(self.widths) != expected:
            missing = sorted(expected - set(self.widths))
            extra = sorted(set(self.widths) - expected)
            raise SliceSchedError(f"slice keys mismatch: missing={missing} extra={extra}")
        for w in self.widths.values():
            if w < 0:
                raise SliceSchedError("negative slice width")
        for link in net.links:
            load = self.link_load(link.id)
            if load > link.capacity:
                raise CapacityError(
                    f"link {link.id!r}: slices sum to {load} > capacity {link.capacity}"
                )

    @classmethod
    def uniform(cls, flows: Iterable[Flow], width) -> "SliceAllocation":
        return cls({(f.id, e): as_fraction(width) for f in flows for e in f.route})

    def to_json(self) -> list[dict]:
        return [
            {"flow": i, "link": e, "width": format_fraction(w)}
            for (i, e), w in sorted(self.widths.items())
        ]

    @classmethod
    def from_json(cls, rows: list[dict]) -> "SliceAllocation":
        return cls({(r["flow"], r["link"]): Fraction(str(r["width"])) for r in rows})


@dataclass(frozen=True)
class Instance:
    """A network plus the flows it has to carry."""

    network: Network
    flows: tuple[Flow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "flows", tuple(self.flows))
        ids = [f.id for f in self.flows]
        if len(set(ids)) != len(ids):
            raise SliceSchedError("duplicate flow ids")
        for f in self.flows:
            f.validate(self.network)

    def flow(self, flow_id: str) -> Flow:
        for f in self.flows:
            if f.id == flow_id:
                return f
        raise SliceSchedError(f"unknown flow {flow_id!r}")

    def with_flows(self, flows: Iterable[Flow]) -> "Instance":
        return Instance(self.network, tuple(flows))

    def to_json(self) -> dict:
        net = self.network
        return {
            "nodes": list(net.nodes),
            "links": [
                {"id": l.id, "from": l.tail, "to": l.head, "capacity": format_fraction(l.capacity)}
                for l in net.links
            ],
            "phi": net.phi,
            "flows": [
                {
                    "id": f.id,
                    "src": f.src,
                    "dst": f.dst,
                    "lambda": format_fraction(f.lam),
                    "tau": f.tau,
                    "route": list(f.route),
                }
                for f in self.flows
            ],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "Instance":
        links = [
            Link(str(l["id"]), str(l["from"]), str(l["to"]), Fraction(str(l.get("capacity", 1))))
            for l in doc["links"]
        ]
        net = Network(tuple(str(v) for v in doc["nodes"]), tuple(links), int(doc.get("phi", 1)))
        flows = []
        for f in doc.get("flows", []):
            route = f.get("route")
            if route is None:
                route = net.shortest_path_route(str(f["src"]), str(f["dst"]))
            flows.append(
                Flow(
                    str(f["id"]),
                    str(f["src"]),
                    str(f["dst"]),
                    Fraction(str(f["lambda"])),
                    int(f["tau"]),
                    tuple(str(e) for e in route),
                )
            )
        return cls(net, tuple(flows))

    @classmethod
    def load(cls, path) -> "Instance":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n", encoding="utf-8")


def line_network(n_links: int, phi: int = 1, capacity=1) -> Network:
    """Directed line v0 -> v1 -> ... -> v_n with links e0..e_{n-1}.

    ``phi`` is capped at ``n_links - 1`` so a one-link line is valid.
    """
    phi = min(phi, max(n_links - 1, 0))
    nodes = tuple(f"v{i}" for i in range(n_links + 1))
    links = tuple(Link(f"e{i}", f"v{i}", f"v{i + 1}", capacity) for i in range(n_links))
    return Network(nodes, links, phi)


def line_flow(net: Network, lam, tau: int, flow_id: str = "f0", hops: int | None = None) -> Flow:
    """Flow over the first ``hops`` links of a :func:`line_network`."""
    hops = len(net.links) if hops is None else hops
    route = tuple(f"e{i}" for i in range(hops))
    return Flow(flow_id, "v0", f"v{hops}", lam, tau, route)
