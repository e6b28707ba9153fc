"""Benchmarks: Fast Edge on/off, the static configuration sweep, and the
orchestrator against static all-remote / all-local policies.

All drivers are closed-loop: each client thread issues its next request
as soon as the previous one returns. Request kinds come from a seeded
sequence, so a run with one client is reproducible request for request.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import random
import statistics
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

from .actions import ActionProfile, ActionTable, synth_manifest
from .errors import NoFeasibleConfig
from .graph import Graph, Schema
from .jsorc import (UNLIMITED, Applier, EndpointManager, Orchestrator, PolicyParams, analyze_application,
                    footprint)
from .lang import parse
from .metrics import MetricsRecorder, percentile
from .runtime import Runtime
from .storage import LRUCache, MemoryBackend, TierConfig, TieredStore

log = logging.getLogger(__name__)

KINDS = ("create", "walk", "action_heavy")

MYCA_SOURCE = """
node user { has name; }
node day { has date, score; }
node task { has title, score; }
edge owns {}
edge next {}
edge has_task {}

walker walk_days {
    has total;
    if here.score != null {
        total = total + here.score;
    }
    take -->:next(day);
    take -->:has_task(task);
}
"""


@dataclass(frozen=True)
class WorkloadSpec:
    mix: dict[str, float] = field(default_factory=lambda: {"create": 0.2, "walk": 0.8})
    clients: int = 1
    duration_s: Optional[float] = None
    requests: Optional[int] = 50  # stop after this many requests (whichever comes first)
    graph_seed: int = 0
    graph_size: int = 100  # day nodes in the chain
    chain_fanout: int = 2  # task leaves per day
    cache_capacity: int = 1024

    def __post_init__(self) -> None:
        if not self.mix or any(k not in KINDS or w < 0 for k, w in self.mix.items()):
            raise ValueError(f"mix weights must be non-negative over {KINDS}")
        if not math.isclose(sum(self.mix.values()), 1.0, abs_tol=1e-9):
            raise ValueError("mix weights must sum to 1")
        if self.clients < 1:
            raise ValueError("clients must be >= 1")
        if self.duration_s is None and self.requests is None:
            raise ValueError("need duration_s or requests")

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "WorkloadSpec":
        return cls(**d)

    def request_kinds(self) -> Iterable[str]:
        """Endless seeded sequence of request kinds."""
        rng = random.Random(self.graph_seed)
        kinds = sorted(self.mix)
        weights = [self.mix[k] for k in kinds]
        while True:
            yield rng.choices(kinds, weights)[0]


@dataclass
class Sample:
    kind: str
    start: float
    end: float
    objects_fetched: int = 0
    store_reads: int = 0
    cache_hits: int = 0
    store_writes: int = 0

    @property
    def latency_us(self) -> float:
        return (self.end - self.start) * 1e6


@dataclass
class BenchResult:
    scenario: str
    columns: list[str]
    rows: list[dict[str, Any]] = field(default_factory=list)
    raw: dict[str, list[float]] = field(default_factory=dict)  # row label -> latencies (us)

    def write_csv(self, path: str | Path, rows: Optional[list[dict[str, Any]]] = None,
                  columns: Optional[list[str]] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=columns or self.columns, extrasaction="ignore")
            w.writeheader()
            for row in self.rows if rows is None else rows:
                w.writerow(row)
        return path

    def write_raw(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.raw), encoding="utf-8")
        return path


def latency_stats(latencies_us: Sequence[float], span_s: float) -> dict[str, float]:
    if not latencies_us:
        return {"requests": 0, "qps": 0.0, "mean_us": math.nan, "p99_us": math.nan}
    return {
        "requests": len(latencies_us),
        "qps": len(latencies_us) / span_s if span_s > 0 else math.inf,
        "mean_us": statistics.fmean(latencies_us),
        "p99_us": percentile(latencies_us, 99),
    }


def drive(spec: WorkloadSpec, handlers: dict[str, Callable[[], Optional[dict[str, int]]]],
          stop: Optional[threading.Event] = None) -> list[Sample]:
    """Closed-loop load: ``spec.clients`` threads pull kinds from the
    shared seeded sequence until the request cap or duration is reached."""
    kinds = iter(spec.request_kinds())
    lock = threading.Lock()
    issued = itertools.count()
    samples: list[Sample] = []
    deadline = None if spec.duration_s is None else time.monotonic() + spec.duration_s
    errors: list[BaseException] = []

    def client() -> None:
        while not errors:
            if stop is not None and stop.is_set():
                return
            if deadline is not None and time.monotonic() >= deadline:
                return
            with lock:
                n = next(issued)
                if spec.requests is not None and n >= spec.requests:
                    return
                kind = next(kinds)
            t0 = time.monotonic()
            try:
                counters = handlers[kind]() or {}
            except BaseException as exc:
                errors.append(exc)
                return
            t1 = time.monotonic()
            with lock:
                samples.append(Sample(kind, t0, t1, **counters))

    threads = [threading.Thread(target=client, name=f"client{i}") for i in range(spec.clients)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if errors:
        raise errors[0]
    return samples


# Fast Edge

class MycaApp:
    """A seeded per-user chain of day nodes, each with task leaves."""

    def __init__(self, runtime: Runtime, spec: WorkloadSpec) -> None:
        self.rt = runtime
        self.spec = spec
        self.rng = random.Random(spec.graph_seed + 1)
        self.day_count = 0
        self.root = 0
        self.tail = 0
        self._tail_lock = threading.Lock()

    def _add_day(self, s, prev: int) -> int:
        self.day_count += 1
        day = s.create_node("day", {"date": f"day-{self.day_count}", "score": self.rng.randint(0, 9)})
        s.create_edge("next", prev, day)
        for i in range(self.spec.chain_fanout):
            task = s.create_node("task", {"title": f"task-{self.day_count}-{i}", "score": self.rng.randint(0, 9)})
            s.create_edge("has_task", day, task)
        return day

    def build(self) -> None:
        with self.rt.graph.transaction() as s:
            self.root = s.create_node("user", {"name": "user-0"})
            first = s.create_node("day", {"date": "day-0", "score": 0})
            s.create_edge("owns", self.root, first)
            self.head = self.tail = first
            for _ in range(self.spec.graph_size - 1):
                self.tail = self._add_day(s, self.tail)

    def create(self) -> dict[str, int]:
        with self._tail_lock:
            s = self.rt.graph.session()
            s.node(self.tail)
            day = self._add_day(s, self.tail)
            writes = s.commit()
            self.tail = day
        t = s.tally
        return {"objects_fetched": t.objects_fetched, "store_reads": t.store_reads,
                "cache_hits": t.cache_hits, "store_writes": writes}

    def walk(self) -> dict[str, int]:
        res = self.rt.run_walker("walk_days", self.head, {"total": 0})
        t = res.tally
        return {"objects_fetched": t.objects_fetched, "store_reads": t.store_reads, "cache_hits": t.cache_hits}


FASTEDGE_COLUMNS = ["scenario", "kind", "fusion_threshold", "fusion", "requests", "qps", "mean_us", "p99_us",
                    "objects_fetched", "store_reads", "cache_hits", "store_writes", "objects_per_request"]


def _myca_runtime(spec: WorkloadSpec, threshold: int, path: Optional[Path]) -> Runtime:
    program = parse(MYCA_SOURCE)
    tiers = TierConfig(spec.cache_capacity, threshold, str(path) if path else None)
    store = TieredStore(tiers) if path else TieredStore(tiers, MemoryBackend())
    return Runtime(program, Graph(Schema.from_program(program), store))


def run_fast_edge_once(spec: WorkloadSpec, threshold: int, path: Optional[Path]) -> tuple[list[Sample], MycaApp]:
    """Build the seeded graph, reopen the store cold, drive the workload."""
    builder = _myca_runtime(spec, threshold, path)
    app = MycaApp(builder, spec)
    app.build()
    if path is not None:
        rt = _myca_runtime(spec, threshold, path)  # fresh cache over the same files
    else:
        rt = builder
        rt.graph.store.cache = type(rt.graph.store.cache)(spec.cache_capacity)
    app.rt = rt
    samples = drive(spec, {"create": app.create, "walk": app.walk})
    builder.close()
    rt.close()
    return samples, app


def bench_fast_edge(spec: WorkloadSpec, thresholds: Sequence[int] = (64,), out_dir: str | Path | None = None,
                    on_disk: bool = True) -> BenchResult:
    """The identical seeded workload with fusion off (threshold 0) and at
    each threshold; one row per (threshold, request kind)."""
    result = BenchResult("fastedge", FASTEDGE_COLUMNS)
    with tempfile.TemporaryDirectory(prefix="jacette-fastedge-") as tmp:
        for threshold in [0, *thresholds]:
            path = Path(tmp) / f"t{threshold}-{len(result.rows)}" if on_disk else None
            samples, _ = run_fast_edge_once(spec, threshold, path)
            for kind in sorted({s.kind for s in samples}):
                mine = [s for s in samples if s.kind == kind]
                lat = [s.latency_us for s in mine]
                span = max(s.end for s in mine) - min(s.start for s in mine)
                row = {"scenario": "fastedge", "kind": kind, "fusion_threshold": threshold,
                       "fusion": threshold > 0, **latency_stats(lat, span)}
                for c in ("objects_fetched", "store_reads", "cache_hits", "store_writes"):
                    row[c] = sum(getattr(s, c) for s in mine)
                row["objects_per_request"] = row["objects_fetched"] / len(mine)
                result.rows.append(row)
                result.raw[f"{kind}@{threshold}"] = lat
    if out_dir is not None:
        out = Path(out_dir)
        for kind in ("create", "walk"):
            result.write_csv(out / f"fastedge_{kind}.csv", [r for r in result.rows if r["kind"] == kind])
        result.write_raw(out / "fastedge_raw.json")
    return result


# action workloads

def pipeline_source(names: Sequence[str]) -> str:
    cans = "".join(f"    can {n};\n" for n in names)
    calls = "".join(f"    {n}();\n" for n in names)
    return f"node doc {{ has text; }}\n\nwalker pipeline {{\n{cans}{calls}}}\n"


class ActionRig:
    """A runtime whose one walker calls every synthetic action once per
    request, with a per-action remote endpoint and injected delay."""

    def __init__(self, compute_ms: Sequence[float], delay_ms: Sequence[float],
                 footprints: Optional[Sequence[int]] = None, payload_bytes: int = 16) -> None:
        self.manifest = synth_manifest(list(compute_ms), list(delay_ms), payload_bytes=payload_bytes)
        if footprints is not None:
            self.manifest = [replace(e, mem_footprint_bytes=f) for e, f in zip(self.manifest, footprints)]
        self.names = [e.name for e in self.manifest]
        self.recorder = MetricsRecorder()
        self.table = ActionTable(self.recorder)
        self.table.register_entries(self.manifest)
        self.endpoints = EndpointManager(self.table)
        for name in self.names:
            self.table.set_endpoint(name, self.endpoints.ensure(name))
        program = parse(pipeline_source(self.names))
        self.runtime = Runtime(program, actions=self.table, recorder=self.recorder,
                               tiers=TierConfig(store_path=None))
        self.doc = self.runtime.graph.create_node("doc", {"text": "hello"})
        self.profiles = None

    def profile(self, trials: int = 5, path: str | Path | None = None):
        self.profiles = analyze_application(self.table, self.names, trials, path)
        return self.profiles

    def applier(self) -> Applier:
        return Applier(self.table, self.names, self.profiles or self._flat_profiles(), self.endpoints)

    def _flat_profiles(self):
        return [ActionProfile(e.name, 1.0, 1.0, 1.0, e.mem_footprint_bytes, 0) for e in self.manifest]

    def apply(self, mask: int) -> None:
        self.applier().apply(mask, UNLIMITED)

    def request(self) -> None:
        self.runtime.run_walker("pipeline", self.doc)

    def close(self) -> None:
        self.endpoints.close()
        self.runtime.close()


SWEEP_COLUMNS = ["scenario", "config_mask", "config", "local_count", "requests", "qps", "mean_us", "p99_us"]
GROUP_COLUMNS = ["local_count", "configs", "min", "q1", "median", "q3", "max"]


def box_stats(values: Sequence[float]) -> dict[str, float]:
    return {"min": min(values), "q1": percentile(values, 25), "median": statistics.median(values),
            "q3": percentile(values, 75), "max": max(values)}


def bench_config_sweep(spec: WorkloadSpec, n_actions: int = 5, compute_ms: float = 2.0,
                       delay_ms: Optional[Sequence[float]] = None, warmup: int = 2,
                       budget: int = UNLIMITED, out_dir: str | Path | None = None) -> tuple[BenchResult, list[dict]]:
    """Every static configuration of ``n_actions`` synthetic actions; also
    returns box statistics of mean latency grouped by local count."""
    if 2 ** n_actions > 4096:
        raise ValueError("too many configurations")
    delay_ms = list(delay_ms) if delay_ms is not None else [float(i + 1) for i in range(n_actions)]
    rig = ActionRig([compute_ms] * n_actions, delay_ms)
    result = BenchResult("sweep", SWEEP_COLUMNS)
    run_spec = replace(spec, mix={"action_heavy": 1.0})
    try:
        profiles = rig._flat_profiles()
        for mask in range(2 ** n_actions):
            if footprint(mask, profiles) > budget:
                raise NoFeasibleConfig(f"config {mask:b} does not fit budget {budget}")
            rig.apply(mask)
            for _ in range(warmup):
                rig.request()
            samples = drive(run_spec, {"action_heavy": rig.request})
            lat = [s.latency_us for s in samples]
            span = max(s.end for s in samples) - min(s.start for s in samples)
            config = format(mask, f"0{n_actions}b")
            result.rows.append({"scenario": "sweep", "config_mask": mask, "config": config,
                                "local_count": bin(mask).count("1"), **latency_stats(lat, span)})
            result.raw[config] = lat
    finally:
        rig.close()
    groups = []
    for k in range(n_actions + 1):
        means = [r["mean_us"] for r in result.rows if r["local_count"] == k]
        groups.append({"local_count": k, "configs": len(means), **box_stats(means)})
    if out_dir is not None:
        out = Path(out_dir)
        result.write_csv(out / "sweep.csv")
        result.write_csv(out / "sweep_groups.csv", groups, GROUP_COLUMNS)
        result.write_raw(out / "sweep_raw.json")
    return result, groups


# orchestrator comparison

ORCH_COLUMNS = ["scenario", "policy", "label", "config_mask", "requests", "qps", "mean_us", "p99_us",
                "steady_requests", "steady_mean_us", "steady_p99_us",
                "norm_qps", "norm_mean_latency", "norm_p99_latency", "speedup_mean", "speedup_p99"]


def bench_orchestrator(spec: WorkloadSpec, policies: Sequence[str] = ("all_remote", "all_local", "jsorc"),
                       n_actions: int = 2, compute_ms: float = 5.0, cc: float = 3.0,
                       params: Optional[PolicyParams] = None, trials: int = 5,
                       out_dir: str | Path | None = None) -> BenchResult:
    """One run per policy on the same seeded action-heavy workload.

    The injected delay makes each action's remote latency ``cc`` times its
    local latency. Normalized columns divide by the all-remote run (for
    latency: all-remote / policy, so higher is better everywhere).
    """
    params = params or PolicyParams(epoch_interval_s=3600.0, eval_window=10)
    delay = compute_ms * (cc - 1.0)
    rig = ActionRig([compute_ms] * n_actions, [delay] * n_actions)
    run_spec = replace(spec, mix={"action_heavy": 1.0})
    result = BenchResult("jsorc", ORCH_COLUMNS)
    all_local = (1 << n_actions) - 1
    try:
        rig.profile(trials)
        for policy in policies:
            rig.apply(0)
            rig.request()
            orch = None
            steady_after = -math.inf
            if policy == "all_local":
                rig.apply(all_local)
                rig.request()
            elif policy == "jsorc":
                orch = Orchestrator(rig.table, rig.names, rig.profiles, params,
                                    recorder=rig.recorder, endpoints=rig.endpoints)
                orch.start()
            elif policy != "all_remote":
                raise ValueError(f"unknown policy {policy!r}")
            t_start = time.monotonic()
            samples = drive(run_spec, {"action_heavy": rig.request})
            mask = rig.applier().current()
            if orch is not None:
                orch.stop()
                if orch.applied_at is not None:
                    steady_after = orch.applied_at
            lat = [s.latency_us for s in samples]
            span = max(s.end for s in samples) - t_start
            steady = [s for s in samples if s.start >= steady_after]
            steady_lat = [s.latency_us for s in steady]
            steady_span = (max(s.end for s in steady) - min(s.start for s in steady)) if steady else 0.0
            st = latency_stats(steady_lat, steady_span)
            row = {"scenario": "jsorc", "policy": policy, "label": "upper bound" if policy == "all_local" else "",
                   "config_mask": mask, **latency_stats(lat, span),
                   "steady_requests": st["requests"], "steady_mean_us": st["mean_us"], "steady_p99_us": st["p99_us"]}
            result.rows.append(row)
            result.raw[policy] = lat
        base = next((r for r in result.rows if r["policy"] == "all_remote"), None)
        for r in result.rows:
            if base is None:
                break
            r["norm_qps"] = r["qps"] / base["qps"]
            r["norm_mean_latency"] = base["mean_us"] / r["mean_us"]
            r["norm_p99_latency"] = base["p99_us"] / r["p99_us"]
            r["speedup_mean"] = base["steady_mean_us"] / r["steady_mean_us"]
            r["speedup_p99"] = base["p99_us"] / r["p99_us"]
    finally:
        rig.close()
    if out_dir is not None:
        out = Path(out_dir)
        result.write_csv(out / "jsorc.csv")
        result.write_raw(out / "jsorc_raw.json")
    return result


def spec_to_json(spec: WorkloadSpec) -> dict[str, Any]:
    return asdict(spec)
