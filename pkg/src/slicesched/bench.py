"""Instance generation, throughput reference and parameter sweeps."""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Sequence

import networkx as nx
import numpy as np
from scipy.optimize import linprog

from . import lp
from .model import Flow, InfeasibleError, Instance, Network, SliceSchedError, as_fraction
from .rng import XorShift64Star, splitmix64
from .simulator import default_horizon, simulate
from .synthesis import arsc, cbh_baseline, greedy_matching

log = logging.getLogger(__name__)

EPSILON = Fraction(1, 1024)
CSV_COLUMNS = ["axis_value", "policy", "feasibility_rate", "mean_max_delay", "mean_bound", "mean_runtime_ms"]


def sample_mesh() -> Instance:
    """The shipped 3x4 grid: 12 nodes, 34 directed unit-capacity links, phi=1."""
    text = resources.files("slicesched.data").joinpath("sample_mesh.json").read_text(encoding="utf-8")
    return Instance.from_json(json.loads(text))


# -- instances ---------------------------------------------------------------


def generate_instance(
    net: Network,
    n_flows: int,
    seed: int,
    lam=EPSILON,
    tau: int | None = None,
) -> list[Flow]:
    """``n_flows`` flows with uniform random src != dst pairs and shortest-path routes."""
    if n_flows < 0:
        raise SliceSchedError("flow count must be non-negative")
    if n_flows == 0:
        return []
    g = nx.DiGraph()
    g.add_nodes_from(net.nodes)
    g.add_edges_from((l.tail, l.head) for l in net.links)
    if len(net.nodes) < 2 or not nx.is_strongly_connected(g):
        raise SliceSchedError("topology must be strongly connected")
    rng = XorShift64Star(seed)
    n = len(net.nodes)
    flows = []
    for i in range(n_flows):
        s = rng.below(n)
        d = rng.below(n - 1)
        if d >= s:
            d += 1
        src, dst = net.nodes[s], net.nodes[d]
        route = net.shortest_path_route(src, dst)
        flows.append(Flow(f"f{i}", src, dst, as_fraction(lam), tau or 2 * len(route), route))
    return flows


def with_demand(flows: Sequence[Flow], lam, tau: int) -> list[Flow]:
    lam = as_fraction(lam)
    return [dataclasses.replace(f, lam=lam, tau=int(tau)) for f in flows]


# -- reference throughput ----------------------------------------------------


def _maximal_activation_sets(net: Network, links: Sequence[str], cap: int) -> list[frozenset] | None:
    g = nx.Graph()
    g.add_nodes_from(links)
    for i, a in enumerate(links):
        for b in links[i + 1 :]:
            if net.compatible(a, b):
                g.add_edge(a, b)
    out = []
    for clique in nx.find_cliques(g):
        out.append(frozenset(clique))
        if len(out) > cap:
            return None
    out.sort(key=lambda s: sorted(net.index[e] for e in s))
    return out


def lambda_star_reference(net: Network, flows: Sequence[Flow], cap: int = 100_000) -> Fraction | None:
    """Largest common arrival rate any activation mix can carry; None when no link carries traffic.

    Solved as the dual covering problem: max d.y s.t. sum_{e in m} y_e <= 1 for
    every maximal activation set m, where d_e = flows through e / c_e; the
    answer is 1/value. Rows are generated lazily from the enumerated sets.
    """
    count: dict[str, int] = {}
    for f in flows:
        for e in f.route:
            count[e] = count.get(e, 0) + 1
    links = [e for e in net.link_ids if count.get(e)]
    if not links:
        return None
    demand = [Fraction(count[e]) / net.capacity(e) for e in links]
    sets = _maximal_activation_sets(net, links, cap)
    if sets is None:
        conflict = nx.Graph()
        conflict.add_nodes_from(links)
        conflict.add_edges_from((a, b) for a in links for b in net.conflicts[a] if b in count)
        colors = nx.greedy_color(conflict)
        chi = max(colors.values(), default=0) + 1
        lower = min(1 / d for d in demand) / chi
        log.warning("more than %d maximal activation sets; using coloring lower bound %s", cap, lower)
        return lower
    pos = {e: j for j, e in enumerate(links)}
    rows: list[frozenset] = []
    covered: set[str] = set()
    for s in sets:
        if not s <= covered:
            rows.append(s)
            covered |= s
    # warm start with the sets a floating-point solve puts weight on; the
    # exact loop below still certifies the answer against every set
    dense = np.array([[1.0 if e in s else 0.0 for e in links] for s in sets])
    approx = linprog(-np.array([float(d) for d in demand]), A_ub=dense, b_ub=np.ones(len(sets)), method="highs")
    if approx.status == 0:
        chosen = set(rows)
        for s, weight in zip(sets, approx.ineqlin.marginals):
            if abs(weight) > 1e-9 and s not in chosen:
                rows.append(s)
                chosen.add(s)
    while True:
        A = [[1 if e in s else 0 for e in links] for s in rows]
        sol = lp.maximize(demand, A, [1] * len(rows))
        y = sol.x
        worst, worst_val = None, Fraction(1)
        for s in sets:
            v = sum((y[pos[e]] for e in s), Fraction(0))
            if v > worst_val:
                worst, worst_val = s, v
        if worst is None:
            return 1 / sol.value
        rows.append(worst)


# -- sweeps ------------------------------------------------------------------


def _parse_level(v) -> Fraction | str:
    if isinstance(v, str) and v.lower() in ("eps", "epsilon"):
        return "eps"
    return as_fraction(v)


@dataclass
class SweepSpec:
    """Sweep description.

    On the ``deadline`` axis ``grid`` holds deadlines and ``series`` holds
    throughput levels; on the ``throughput`` axis it is the other way round.
    A throughput level is either ``"eps"`` (1/1024 packets/slot) or a factor
    applied to each trial's reference throughput.
    """

    topology: str | None = None
    flows: int = 32
    seed: int = 1
    axis: str = "deadline"
    grid: list = field(default_factory=list)
    series: list = field(default_factory=lambda: ["eps"])
    trials: int = 100
    workers: int = 1

    def __post_init__(self):
        if self.axis not in ("deadline", "throughput"):
            raise SliceSchedError("axis must be 'deadline' or 'throughput'")
        if not self.grid:
            raise SliceSchedError("grid must not be empty")
        if not self.series:
            raise SliceSchedError("series must not be empty")
        if self.trials < 1:
            raise SliceSchedError("trials must be at least 1")

    @classmethod
    def from_json(cls, doc: dict, base: Path | None = None) -> "SweepSpec":
        doc = dict(doc)
        if doc.get("topology") and base is not None:
            p = Path(doc["topology"])
            if not p.is_absolute():
                doc["topology"] = str(base / p)
        known = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})

    @classmethod
    def load(cls, path) -> "SweepSpec":
        path = Path(path)
        return cls.from_json(json.loads(path.read_text(encoding="utf-8")), path.parent)

    def network(self) -> Network:
        if self.topology:
            return Instance.load(self.topology).network
        return sample_mesh().network


def round_robin_threshold(net: Network) -> int:
    """Matchings used by greedy matching at uniform rates times the longest shortest route."""
    matchings, _ = greedy_matching(net, {e: EPSILON for e in net.link_ids})
    longest = 0
    for s in net.nodes:
        for d in net.nodes:
            if s != d:
                longest = max(longest, len(net.shortest_path_route(s, d)))
    return len(matchings) * longest


@dataclass(frozen=True)
class TrialOutcome:
    feasible: bool
    max_delay: int
    bound: int
    runtime_ms: float


def _run_policy(policy: str, net: Network, flows: list[Flow]) -> TrialOutcome:
    t0 = time.perf_counter()
    try:
        result = arsc(net, flows) if policy == "ARSC" else cbh_baseline(net, flows)
    except InfeasibleError:
        result = None
    runtime = (time.perf_counter() - t0) * 1000.0
    if result is None:
        return TrialOutcome(False, 0, 0, runtime)
    report = result.report or simulate(net, flows, result.slices, result.schedule, default_horizon(result.schedule, flows))
    if not report.supports:
        log.error("%s result failed simulation; counted infeasible", policy)
        return TrialOutcome(False, 0, 0, runtime)
    bound = max(result.deadline_bound(f) for f in flows)
    return TrialOutcome(True, report.max_delay, bound, runtime)


def _level_label(level) -> str:
    return "eps" if level == "eps" else str(level)


def _trial_job(args) -> list[tuple[int, int, str, TrialOutcome]]:
    spec, net, trial = args
    base = generate_instance(net, spec.flows, splitmix64(spec.seed * 1_000_003 + trial))
    ref = lambda_star_reference(net, base) if base else None
    out = []
    for gi, g in enumerate(spec.grid):
        for si, s in enumerate(spec.series):
            tau, level = (g, s) if spec.axis == "deadline" else (s, g)
            level = _parse_level(level)
            if level == "eps":
                lam = EPSILON
            else:
                if ref is None:
                    continue
                lam = level * ref
            flows = with_demand(base, lam, int(tau))
            for policy in ("ARSC", "CBH"):
                out.append((gi, si, policy, _run_policy(policy, net, flows)))
    return out


def run_sweep(spec: SweepSpec) -> list[dict]:
    """Aggregate rows in grid order, then series, then ARSC before CBH."""
    net = spec.network()
    jobs = [(spec, net, t) for t in range(spec.trials)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    buckets: dict[tuple[int, int, str], list[TrialOutcome]] = {}
    for trial in results:
        for gi, si, policy, outcome in trial:
            buckets.setdefault((gi, si, policy), []).append(outcome)
    rows = []
    for gi, g in enumerate(spec.grid):
        for si, s in enumerate(spec.series):
            for policy in ("ARSC", "CBH"):
                outs = buckets.get((gi, si, policy), [])
                ok = [o for o in outs if o.feasible]
                rows.append(
                    {
                        "axis_value": str(as_fraction(g)) if spec.axis == "deadline" else _level_label(_parse_level(g)),
                        "policy": f"{policy}@{_level_label(_parse_level(s)) if spec.axis == 'deadline' else s}",
                        "feasibility_rate": len(ok) / len(outs) if outs else 0.0,
                        "mean_max_delay": sum(o.max_delay for o in ok) / len(ok) if ok else 0.0,
                        "mean_bound": sum(o.bound for o in ok) / len(ok) if ok else 0.0,
                        "mean_runtime_ms": sum(o.runtime_ms for o in outs) / len(outs) if outs else 0.0,
                    }
                )
    return rows


def rows_to_csv(rows: list[dict], include_runtime: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow(
            [
                r["axis_value"],
                r["policy"],
                f"{r['feasibility_rate']:.4f}",
                f"{r['mean_max_delay']:.4f}",
                f"{r['mean_bound']:.4f}",
                f"{r['mean_runtime_ms']:.3f}" if include_runtime else "",
            ]
        )
    return buf.getvalue()


def write_sweep_csv(rows: list[dict], path, include_runtime: bool = True) -> None:
    Path(path).write_text(rows_to_csv(rows, include_runtime), encoding="utf-8")
