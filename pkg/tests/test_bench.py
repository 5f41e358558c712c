import json
from fractions import Fraction

import pytest

from slicesched import bench
from slicesched.model import Link, Network, SliceSchedError, line_flow, line_network
from slicesched.rng import XorShift64Star, splitmix64

F = Fraction


def test_xorshift_is_deterministic_and_bounded():
    a, b = XorShift64Star(42), XorShift64Star(42)
    xs = [a.next_u64() for _ in range(5)]
    assert xs == [b.next_u64() for _ in range(5)]
    assert all(0 <= x < 2**64 for x in xs)
    r = XorShift64Star(7)
    assert all(0 <= r.below(3) < 3 for _ in range(200))
    assert XorShift64Star(1).next_u64() != XorShift64Star(2).next_u64()
    assert splitmix64(0) != splitmix64(1)


def test_sample_mesh_shape():
    mesh = bench.sample_mesh().network
    assert len(mesh.nodes) == 12 and len(mesh.links) == 34 and mesh.phi == 1
    assert all(l.capacity == 1 for l in mesh.links)


def test_round_robin_threshold_on_mesh():
    assert bench.round_robin_threshold(bench.sample_mesh().network) == 40


def test_generate_instance_is_deterministic():
    mesh = bench.sample_mesh().network
    a = bench.generate_instance(mesh, 10, 3)
    assert a == bench.generate_instance(mesh, 10, 3)
    assert a != bench.generate_instance(mesh, 10, 4)
    for f in a:
        assert f.src != f.dst
        assert f.route == mesh.shortest_path_route(f.src, f.dst)
        assert f.tau == 2 * f.hops and f.lam == bench.EPSILON


def test_generate_instance_edge_cases():
    mesh = bench.sample_mesh().network
    assert bench.generate_instance(mesh, 0, 1) == []
    with pytest.raises(SliceSchedError):
        bench.generate_instance(mesh, -1, 1)
    with pytest.raises(SliceSchedError):
        bench.generate_instance(line_network(3), 2, 1)


def test_generate_instance_on_complete_graph():
    nodes = ("a", "b", "c")
    links = tuple(Link(f"{u}{v}", u, v, 1) for u in nodes for v in nodes if u != v)
    net = Network(nodes, links, 1)
    flows = bench.generate_instance(net, 20, 9, lam=F(1, 10), tau=7)
    assert all(f.hops == 1 and f.tau == 7 and f.lam == F(1, 10) for f in flows)


def test_lambda_star_reference():
    net = line_network(2)
    assert bench.lambda_star_reference(net, [line_flow(net, F(1, 100), 10)]) == F(1, 2)
    free = line_network(2, phi=0, capacity=3)
    assert bench.lambda_star_reference(free, [line_flow(free, F(1, 100), 10)]) == 3
    assert bench.lambda_star_reference(net, []) is None
    three = line_network(3)
    flows = [line_flow(three, F(1, 100), 10), line_flow(three, F(1, 100), 10, "g", hops=2)]
    assert bench.lambda_star_reference(three, flows) == F(1, 4)


def test_lambda_star_falls_back_to_coloring():
    net = line_network(4)
    flows = [line_flow(net, F(1, 100), 20)]
    exact = bench.lambda_star_reference(net, flows)
    lower = bench.lambda_star_reference(net, flows, cap=1)
    assert lower <= exact


def test_sweep_spec_validation(tmp_path):
    with pytest.raises(SliceSchedError):
        bench.SweepSpec(axis="sideways", grid=[1])
    with pytest.raises(SliceSchedError):
        bench.SweepSpec(grid=[])
    with pytest.raises(SliceSchedError):
        bench.SweepSpec(grid=[40], trials=0)
    (tmp_path / "topo.json").write_text(json.dumps(bench.sample_mesh().to_json()))
    (tmp_path / "spec.json").write_text(json.dumps({"topology": "topo.json", "grid": [40], "extra": 1}))
    spec = bench.SweepSpec.load(tmp_path / "spec.json")
    assert spec.topology == str(tmp_path / "topo.json")
    assert len(spec.network().links) == 34


def test_sweep_rows_and_csv_reproducible():
    spec = bench.SweepSpec(flows=6, grid=[12, 60], series=["eps", "1/2"], trials=3)
    rows = bench.run_sweep(spec)
    assert [r["policy"] for r in rows[:4]] == ["ARSC@eps", "CBH@eps", "ARSC@1/2", "CBH@1/2"]
    assert [r["axis_value"] for r in rows] == ["12"] * 4 + ["60"] * 4
    for r in rows:
        assert 0 <= r["feasibility_rate"] <= 1
        if r["feasibility_rate"]:
            assert r["mean_max_delay"] <= r["mean_bound"]
    a = bench.rows_to_csv(rows, include_runtime=False)
    b = bench.rows_to_csv(bench.run_sweep(spec), include_runtime=False)
    assert a == b
    assert a.splitlines()[0] == ",".join(bench.CSV_COLUMNS)


def test_throughput_axis_labels():
    spec = bench.SweepSpec(flows=4, axis="throughput", grid=["eps", "1/4"], series=[30], trials=2)
    rows = bench.run_sweep(spec)
    assert [r["axis_value"] for r in rows] == ["eps", "eps", "1/4", "1/4"]
    assert rows[0]["policy"] == "ARSC@30"


def test_parallel_sweep_matches_serial():
    spec = bench.SweepSpec(flows=4, grid=[30], trials=2)
    serial = bench.rows_to_csv(bench.run_sweep(spec), include_runtime=False)
    spec.workers = 2
    assert bench.rows_to_csv(bench.run_sweep(spec), include_runtime=False) == serial
