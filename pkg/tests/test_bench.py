import csv
import math
from math import comb

import pytest

from jacette.bench import (FASTEDGE_COLUMNS, GROUP_COLUMNS, MYCA_SOURCE, ORCH_COLUMNS, SWEEP_COLUMNS, MycaApp,
                           WorkloadSpec, bench_config_sweep, bench_fast_edge, bench_orchestrator, drive,
                           run_fast_edge_once)
from jacette.graph import Graph, Schema
from jacette.jsorc import PolicyParams
from jacette.lang import parse
from jacette.runtime import Runtime
from jacette.storage import MemoryBackend, TierConfig, TieredStore


def walk_objects(days, fanout, fused):
    """Objects one walk loads: every day and task, plus their out-edges unless
    fused. The first day of the seeded chain has no tasks."""
    tasks = (days - 1) * fanout
    nodes = days + tasks
    edges = (days - 1) + tasks
    return nodes if fused else nodes + edges


def create_writes(fanout, fused):
    """New day + tasks, their edges unless fused, plus the rewritten tail day."""
    return (1 + fanout) + (0 if fused else 1 + fanout) + 1


def _row(result, kind, threshold):
    return next(r for r in result.rows if r["kind"] == kind and r["fusion_threshold"] == threshold)


@pytest.mark.parametrize("on_disk", [False, True])
@pytest.mark.parametrize("fanout", [0, 2])
def test_walk_fetch_counts_match_analytic(on_disk, fanout):
    spec = WorkloadSpec(mix={"walk": 1.0}, requests=3, graph_size=40, chain_fanout=fanout)
    result = bench_fast_edge(spec, thresholds=(64,), on_disk=on_disk)
    off, on = _row(result, "walk", 0), _row(result, "walk", 64)
    assert off["objects_fetched"] == 3 * walk_objects(40, fanout, False)
    assert on["objects_fetched"] == 3 * walk_objects(40, fanout, True)
    for r in (off, on):
        assert r["objects_fetched"] == r["store_reads"] + r["cache_hits"]
    assert on["objects_fetched"] / off["objects_fetched"] <= 0.55


def test_create_writes_fewer_with_fusion(tmp_path):
    spec = WorkloadSpec(mix={"create": 1.0}, requests=10, graph_size=10, chain_fanout=2)
    result = bench_fast_edge(spec, thresholds=(64,), out_dir=tmp_path)
    assert _row(result, "create", 0)["store_writes"] == 10 * create_writes(2, False)
    assert _row(result, "create", 64)["store_writes"] == 10 * create_writes(2, True)
    with open(tmp_path / "fastedge_create.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        assert reader.fieldnames == FASTEDGE_COLUMNS
        assert len(list(reader)) == 2
    assert (tmp_path / "fastedge_raw.json").exists()


def _walk_total(threshold):
    spec = WorkloadSpec(graph_size=25, chain_fanout=2)
    program = parse(MYCA_SOURCE)
    store = TieredStore(TierConfig(64, threshold), MemoryBackend())
    rt = Runtime(program, Graph(Schema.from_program(program), store))
    app = MycaApp(rt, spec)
    app.build()
    for _ in range(3):
        app.create()
    res = rt.run_walker("walk_days", app.head, {"total": 0})
    return res.report, rt.graph.get(app.tail).context


def test_fusion_leaves_results_unchanged():
    assert _walk_total(0) == _walk_total(64)


def test_counters_reproducible():
    spec = WorkloadSpec(requests=12, graph_size=20)
    a, _ = run_fast_edge_once(spec, 64, None)
    b, _ = run_fast_edge_once(spec, 64, None)
    key = lambda s: (s.kind, s.objects_fetched, s.store_reads, s.cache_hits, s.store_writes)  # noqa: E731
    assert [key(s) for s in a] == [key(s) for s in b]


def test_drive_issues_exact_count_and_seeded_kinds():
    spec = WorkloadSpec(mix={"create": 0.5, "walk": 0.5}, requests=40, clients=4, graph_seed=3)
    seen = []
    samples = drive(spec, {"create": lambda: seen.append("c"), "walk": lambda: seen.append("w")})
    assert len(samples) == 40 == len(seen)
    kinds = spec.request_kinds()
    expected = [next(kinds) for _ in range(40)]
    assert sorted(s.kind for s in samples) == sorted(expected)


def test_drive_by_duration():
    spec = WorkloadSpec(mix={"walk": 1.0}, requests=None, duration_s=0.05)
    samples = drive(spec, {"walk": lambda: None})
    assert samples and max(s.end for s in samples) - min(s.start for s in samples) < 1.0


def test_drive_propagates_handler_errors():
    spec = WorkloadSpec(mix={"walk": 1.0}, requests=5)

    def boom():
        raise RuntimeError("no")

    with pytest.raises(RuntimeError):
        drive(spec, {"walk": boom})


@pytest.mark.parametrize("kw", [
    {"mix": {"create": 0.5}}, {"mix": {"sleep": 1.0}}, {"clients": 0},
    {"requests": None, "duration_s": None}, {"mix": {}},
])
def test_workload_validation(kw):
    with pytest.raises(ValueError):
        WorkloadSpec(**kw)


def test_sweep_shape(tmp_path):
    spec = WorkloadSpec(requests=3)
    result, groups = bench_config_sweep(spec, n_actions=3, compute_ms=0.5, delay_ms=[0.5, 1.0, 1.5],
                                        warmup=1, out_dir=tmp_path)
    assert len(result.rows) == 8
    assert sorted(r["config_mask"] for r in result.rows) == list(range(8))
    assert [g["configs"] for g in groups] == [comb(3, k) for k in range(4)]
    with open(tmp_path / "sweep.csv", newline="") as fh:
        assert csv.DictReader(fh).fieldnames == SWEEP_COLUMNS
    with open(tmp_path / "sweep_groups.csv", newline="") as fh:
        assert csv.DictReader(fh).fieldnames == GROUP_COLUMNS


def test_orchestrator_bench_normalization(tmp_path):
    spec = WorkloadSpec(requests=60)
    params = PolicyParams(epoch_interval_s=3600.0, eval_window=5)
    result = bench_orchestrator(spec, n_actions=2, compute_ms=1.0, cc=3.0, params=params, trials=3,
                                out_dir=tmp_path)
    rows = {r["policy"]: r for r in result.rows}
    base = rows["all_remote"]
    for col in ("norm_qps", "norm_mean_latency", "norm_p99_latency", "speedup_mean", "speedup_p99"):
        assert base[col] == pytest.approx(1.0)
    assert rows["all_local"]["config_mask"] == 0b11
    assert rows["jsorc"]["config_mask"] == 0b11
    assert rows["all_local"]["label"] == "upper bound"
    assert math.isfinite(rows["jsorc"]["steady_mean_us"])
    with open(tmp_path / "jsorc.csv", newline="") as fh:
        assert csv.DictReader(fh).fieldnames == ORCH_COLUMNS
