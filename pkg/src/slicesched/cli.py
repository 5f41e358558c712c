"""Command-line workbench.

Exit codes: 0 on success (or a feasible answer), 2 when the instance is
infeasible, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analytics, bench, oracle
from .model import InfeasibleError, Instance, SliceAllocation, SliceSchedError, as_fraction, format_fraction
from .schedule import CyclicSchedule, build_orr, classify_regularity, inter_scheduling_stats
from .simulator import check_deficit_bound, default_horizon, simulate
from .synthesis import arsc, cbh_baseline

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE = 0, 1, 2

log = logging.getLogger("slicesched")


def _emit(doc, out: str | None) -> None:
    text = json.dumps(doc, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _fair_share_slices(inst: Instance) -> SliceAllocation:
    """Capacity split evenly among the flows crossing each link."""
    count: dict[str, int] = {}
    for f in inst.flows:
        for e in f.route:
            count[e] = count.get(e, 0) + 1
    net = inst.network
    return SliceAllocation({(f.id, e): net.capacity(e) / count[e] for f in inst.flows for e in f.route})


def cmd_synth(args) -> int:
    inst = Instance.load(args.instance)
    try:
        fn = arsc if args.policy == "arsc" else cbh_baseline
        result = fn(inst.network, inst.flows)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if result is None:
        print("infeasible: no schedule found", file=sys.stderr)
        return EXIT_INFEASIBLE
    _emit(result.to_json(), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst = Instance.load(args.instance)
    doc = json.loads(Path(args.schedule).read_text(encoding="utf-8"))
    if "schedule" in doc:
        sched = CyclicSchedule.from_json(doc["schedule"])
        slices = SliceAllocation.from_json(doc["slices"]) if "slices" in doc else None
    else:
        sched = CyclicSchedule.from_json(doc)
        slices = None
    if args.slices:
        slices = SliceAllocation.from_json(json.loads(Path(args.slices).read_text(encoding="utf-8")))
    if slices is None:
        slices = analytics.resource_minimizing_slices(inst.network, sched, inst.flows)
    slices.validate(inst.network, inst.flows)
    sched.validate(inst.network)
    horizon = args.horizon or default_horizon(sched, inst.flows)
    report = simulate(inst.network, inst.flows, slices, sched, horizon)
    out = report.to_json()
    out["deficit_bound"] = check_deficit_bound(inst.network, inst.flows, slices, sched, report).status
    if args.trace:
        report.write_trace_csv(args.trace)
    _emit(out, args.output)
    return EXIT_OK if report.supports else EXIT_INFEASIBLE


def cmd_analyze(args) -> int:
    inst = Instance.load(args.instance)
    net = inst.network
    sched = CyclicSchedule.load(args.schedule) if args.schedule else None
    flows_out = []
    region_rows = []
    for f in inst.flows:
        widths = [net.capacity(e) for e in f.route]
        s = sched or build_orr(f.route, net.phi)
        entry = {
            "flow": f.id,
            "hops": f.hops,
            "schedule": "given" if sched else "orr",
            "max_throughput": format_fraction(analytics.max_supported_throughput(s, widths, f.route)),
            "tau_lower_bound": analytics.tau_lower_bound(s, f.route),
            "worst_case_delay": analytics.worst_case_delay_bound(s, f.route),
            "regularity": classify_regularity(s),
            "k_max": {e: inter_scheduling_stats(s).k_max[e] for e in f.route},
        }
        p0, _ = analytics.region_no_interference(widths)
        tmin, lam_total, _ = analytics.region_total_interference(widths)
        entry["no_interference"] = {"tau": p0.tau, "lambda": format_fraction(p0.lam)}
        entry["total_interference"] = {
            "tau_min": tmin.tau,
            "lambda_at_tau_min": format_fraction(tmin.lam),
            "lambda_max": format_fraction(lam_total),
        }
        if f.hops >= 2:
            reg = analytics.region_primary_interference(widths)
            entry["primary_interference"] = {
                "tau_min": reg.tau_min.tau,
                "lambda_at_tau_min": format_fraction(reg.tau_min.lam),
                "lambda_max": format_fraction(reg.lam_star),
                "activations": [format_fraction(a) for a in reg.activations],
            }
        flows_out.append(entry)
        region_rows.extend((f"{f.id}:{m}", t, l) for m, t, l in analytics.region_rows(widths, s.K))
    if args.regions:
        analytics.write_region_csv(region_rows, args.regions)
    ref = bench.lambda_star_reference(net, inst.flows)
    _emit(
        {"flows": flows_out, "lambda_star_uniform": None if ref is None else format_fraction(ref)},
        args.output,
    )
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = Instance.load(args.instance)
    net = inst.network
    slices = _fair_share_slices(inst)
    out: dict = {"slices": slices.to_json()}
    if len(inst.flows) == 1:
        f = inst.flows[0]
        try:
            w = oracle.min_max_cycle_deadline(net, f, slices)
            out["min_deadline"] = {"tau": w.tau, "cycle": w.schedule.to_json(), "states": w.states_explored}
        except InfeasibleError as exc:
            out["min_deadline"] = {"error": str(exc)}
    sched = oracle.exhaustive_schedule_search(net, inst.flows, slices, args.kmax)
    out["schedule"] = sched.to_json() if sched else None
    _emit(out, args.output)
    return EXIT_OK if sched else EXIT_INFEASIBLE


def cmd_sweep(args) -> int:
    spec = bench.SweepSpec.load(args.spec)
    if args.workers:
        spec.workers = args.workers
    rows = bench.run_sweep(spec)
    bench.write_sweep_csv(rows, args.output, include_runtime=not args.no_runtime)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.topology:
        topo = Instance.load(args.topology)
    else:
        topo = bench.sample_mesh()
    flows = bench.generate_instance(topo.network, args.flows, args.seed, lam=as_fraction(args.lam), tau=args.tau)
    inst = Instance(topo.network, tuple(flows))
    _emit(inst.to_json(), args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="slicesched", description="TDMA slice and schedule workbench")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="build a schedule and slices for an instance")
    s.add_argument("instance")
    s.add_argument("--policy", choices=["arsc", "cbh"], default="arsc")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("simulate", help="simulate a schedule (or a synth result) on an instance")
    s.add_argument("instance")
    s.add_argument("schedule")
    s.add_argument("--slices", help="slice table JSON; defaults to resource-minimizing widths")
    s.add_argument("--horizon", type=int)
    s.add_argument("--trace", help="write queue traces as CSV")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("analyze", help="closed-form regions and bounds per flow")
    s.add_argument("instance")
    s.add_argument("--schedule")
    s.add_argument("--regions", help="write region endpoints as CSV")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_analyze)

    s = sub.add_parser("oracle", help="exhaustive search on a small instance")
    s.add_argument("instance")
    s.add_argument("--kmax", type=int, required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("sweep", help="run a feasibility/delay sweep")
    s.add_argument("spec")
    s.add_argument("-o", "--output", required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--no-runtime", action="store_true", help="leave the runtime column empty for byte-stable output")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("gen", help="random flows on a topology")
    s.add_argument("--topology")
    s.add_argument("--flows", type=int, default=32)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--lambda", dest="lam", default="1/1024")
    s.add_argument("--tau", type=int, default=60)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_gen)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SliceSchedError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
