"""Command-line entry point: ``jacette <command> ...``.

Exit codes: 0 success, 1 program/runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import signal
import sys
import threading
from pathlib import Path
from typing import Any, Optional, Sequence

from . import bench as B
from .actions import ActionServer, ActionTable, default_manifest, impls_for, load_manifest
from .config import RuntimeConfig, resolve_config
from .corpus import CORPUS_DIR, corpus_check, load_store
from .errors import JacetteError
from .graph import Graph, Schema
from .jsorc import EndpointManager, Orchestrator, analyze_application
from .lang import parse
from .metrics import MetricsRecorder
from .runtime import Runtime
from .storage import TieredStore
from .values import canonical

log = logging.getLogger("jacette")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file (flags and JACETTE_* env vars override it)")
    p.add_argument("--store", help="store directory (default: in memory)")
    p.add_argument("--cache-capacity", type=int, help="shared cache size in objects")
    p.add_argument("--fast-edge-threshold", type=int, help="fuse edges whose context is smaller (0 disables)")
    p.add_argument("--actions-manifest", help="JSON action manifest (default: built-in actions)")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("-v", "--verbose", action="store_true")


def _orch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epoch-interval", type=float, help="seconds between evaluation phases")
    p.add_argument("--eval-window", type=int, help="requests observed per candidate config")
    p.add_argument("--mem-budget", type=int, help="memory budget for local actions, bytes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jacette", description="Walker runtime, action orchestrator and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one walker and print its report")
    _common(p)
    p.add_argument("program", help=".jac program file")
    p.add_argument("walker")
    p.add_argument("--start", help="start node id, or a key from --load")
    p.add_argument("--args", default="{}", help="walker arguments as a JSON object")
    p.add_argument("--load", help="seed store JSON to load first")

    p = sub.add_parser("serve", help="serve the walker HTTP API")
    _common(p)
    _orch_flags(p)
    p.add_argument("program", nargs="?", default=str(CORPUS_DIR / "myca.jac"), help=".jac program (default: myca)")
    p.add_argument("--port", type=int, help="listen port (0 picks a free one)")
    p.add_argument("--host", help="listen address")
    p.add_argument("--load", help="seed store JSON to load first")
    p.add_argument("--jsorc", action="store_true", default=None, help="run the orchestrator")

    p = sub.add_parser("serve-actions", help="serve actions over the line protocol")
    _common(p)
    p.add_argument("--port", type=int)
    p.add_argument("--host")

    p = sub.add_parser("bench", help="run a benchmark and write CSV")
    bsub = p.add_subparsers(dest="scenario", required=True)
    for name, text in (("fastedge", "Fast Edge on vs. off"), ("sweep", "all static configurations"),
                       ("jsorc", "orchestrator vs. static policies")):
        bp = bsub.add_parser(name, help=text)
        _common(bp)
        bp.add_argument("--out", help="output directory")
        bp.add_argument("--scenario-config", help="JSON file with workload fields")
        bp.add_argument("--requests", type=int, help="requests per run")
        bp.add_argument("--clients", type=int, help="closed-loop clients")
        if name == "fastedge":
            bp.add_argument("--graph-size", type=int, default=1000)
            bp.add_argument("--thresholds", default="64", help="comma-separated fusion thresholds")
            bp.add_argument("--kind", choices=("mixed", "walk", "create"), default="mixed")
        elif name == "sweep":
            bp.add_argument("--actions", type=int, default=5)
            bp.add_argument("--compute-ms", type=float, default=2.0)
        else:
            _orch_flags(bp)
            bp.add_argument("--actions", type=int, default=2)
            bp.add_argument("--compute-ms", type=float, default=5.0)
            bp.add_argument("--cc", type=float, default=3.0)

    p = sub.add_parser("orchestrate", help="profile the manifest's actions and run orchestrator epochs")
    _common(p)
    _orch_flags(p)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--out", help="directory for profiles.json and decisions.jsonl")

    p = sub.add_parser("corpus-check", help="parse, round-trip and run the example corpus")
    p.add_argument("--dir", default=str(CORPUS_DIR))
    p.add_argument("--regen", action="store_true", help="rewrite golden files")
    return parser


def _config(ns: argparse.Namespace) -> RuntimeConfig:
    return resolve_config(vars(ns), getattr(ns, "config", None))


def _manifest(cfg: RuntimeConfig):
    return load_manifest(cfg.actions_manifest) if cfg.actions_manifest else default_manifest()


def _runtime(program_path: str, cfg: RuntimeConfig, recorder: Optional[MetricsRecorder] = None) -> Runtime:
    path = Path(program_path)
    if not path.is_file():
        raise UsageError(f"no such program file: {program_path}")
    program = parse(path.read_text(encoding="utf-8"))
    recorder = recorder or MetricsRecorder()
    table = ActionTable(recorder)
    table.register_entries(_manifest(cfg))
    graph = Graph(Schema.from_program(program), TieredStore(cfg.tiers()))
    return Runtime(program, graph, table, recorder)


def _load(rt: Runtime, path: Optional[str]) -> dict[str, int]:
    if not path:
        return {}
    try:
        items = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read store file: {exc}") from exc
    return load_store(rt.graph, items)


def cmd_run(ns: argparse.Namespace) -> int:
    cfg = _config(ns)
    try:
        args = json.loads(ns.args)
    except ValueError as exc:
        raise UsageError(f"--args is not JSON: {exc}") from exc
    if not isinstance(args, dict):
        raise UsageError("--args must be a JSON object")
    rt = _runtime(ns.program, cfg)
    try:
        keys = _load(rt, ns.load)
        if ns.start is None:
            start = next(iter(keys.values()), 1)
        elif ns.start in keys:
            start = keys[ns.start]
        elif ns.start.isdigit():
            start = int(ns.start)
        else:
            raise UsageError(f"unknown start node {ns.start!r}")
        result = rt.run_walker(ns.walker, start, args)
        print(canonical(result.report))
    finally:
        rt.close()
    return 0


def _wait_for_signal() -> None:
    done = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: done.set())
    while not done.wait(0.5):
        pass


def cmd_serve(ns: argparse.Namespace) -> int:
    from .http_api import ApiServer

    cfg = _config(ns)
    rt = _runtime(ns.program, cfg)
    _load(rt, ns.load)
    orch = endpoints = None
    if cfg.jsorc:
        endpoints = EndpointManager(rt.actions)
        names = rt.actions.names()
        for name in names:
            rt.actions.set_endpoint(name, endpoints.ensure(name))
        profiles = analyze_application(rt.actions, names, 5)
        orch = Orchestrator(rt.actions, names, profiles, cfg.policy(), recorder=rt.recorder, endpoints=endpoints)
    api = ApiServer(rt, cfg.port, cfg.host, orch).start()
    if orch is not None:
        orch.start()
    print(f"jacette serving on http://{cfg.host}:{api.port}", flush=True)
    try:
        _wait_for_signal()
    finally:
        log.info("shutting down")
        if orch is not None:
            orch.stop()
        api.shutdown()
        if endpoints is not None:
            endpoints.close()
        rt.close()
    return 0


def cmd_serve_actions(ns: argparse.Namespace) -> int:
    cfg = _config(ns)
    server = ActionServer(impls_for(_manifest(cfg)), cfg.port, cfg.host).start()
    print(f"jacette actions on {cfg.host}:{server.port}", flush=True)
    try:
        _wait_for_signal()
    finally:
        server.shutdown()
    return 0


def _workload(ns: argparse.Namespace, cfg: RuntimeConfig, **defaults: Any) -> B.WorkloadSpec:
    fields: dict[str, Any] = {"graph_seed": cfg.seed, "cache_capacity": cfg.cache_capacity, **defaults}
    if ns.scenario_config:
        fields.update(json.loads(Path(ns.scenario_config).read_text(encoding="utf-8")))
    if ns.requests is not None:
        fields["requests"] = ns.requests
    if ns.clients is not None:
        fields["clients"] = ns.clients
    return B.WorkloadSpec(**fields)


def cmd_bench(ns: argparse.Namespace) -> int:
    cfg = _config(ns)
    out = Path(cfg.out)
    if ns.scenario == "fastedge":
        mix = {"mixed": {"create": 0.2, "walk": 0.8}, "walk": {"walk": 1.0}, "create": {"create": 1.0}}[ns.kind]
        spec = _workload(ns, cfg, mix=mix, graph_size=ns.graph_size, requests=20)
        thresholds = [int(t) for t in ns.thresholds.split(",") if t.strip()]
        result = B.bench_fast_edge(spec, thresholds, out)
        files = ["fastedge_create.csv", "fastedge_walk.csv"]
    elif ns.scenario == "sweep":
        spec = _workload(ns, cfg, requests=10)
        result, _ = B.bench_config_sweep(spec, ns.actions, ns.compute_ms, out_dir=out)
        files = ["sweep.csv", "sweep_groups.csv"]
    else:
        spec = _workload(ns, cfg, requests=300)
        result = B.bench_orchestrator(spec, n_actions=ns.actions, compute_ms=ns.compute_ms, cc=ns.cc,
                                      params=cfg.policy() if ns.epoch_interval or ns.eval_window else None,
                                      out_dir=out)
        files = ["jsorc.csv"]
    for row in result.rows:
        print(json.dumps({k: row.get(k) for k in result.columns}, default=str))
    for f in files:
        print(f"wrote {out / f}", file=sys.stderr)
    return 0


def cmd_orchestrate(ns: argparse.Namespace) -> int:
    cfg = _config(ns)
    rig_manifest = _manifest(cfg)
    recorder = MetricsRecorder()
    table = ActionTable(recorder)
    table.register_entries(rig_manifest)
    endpoints = EndpointManager(table)
    names = table.names()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        for name in names:
            table.set_endpoint(name, endpoints.ensure(name))
        profiles = analyze_application(table, names, ns.trials, out / "profiles.json")
        program = parse(B.pipeline_source(names))
        rt = Runtime(program, actions=table, recorder=recorder)
        doc = rt.graph.create_node("doc", {"text": "hello"})
        params = cfg.policy()
        orch = Orchestrator(table, names, profiles, params, recorder=recorder, endpoints=endpoints,
                            log_path=out / "decisions.jsonl")
        stop = threading.Event()

        def load() -> None:
            while not stop.is_set():
                rt.run_walker("pipeline", doc)

        driver = threading.Thread(target=load, daemon=True)
        driver.start()
        try:
            for _ in range(ns.epochs):
                orch.step()
        finally:
            stop.set()
            driver.join()
        print(json.dumps(orch.status(), indent=2))
    finally:
        endpoints.close()
        table.close()
    return 0


def cmd_corpus_check(ns: argparse.Namespace) -> int:
    results, missing = corpus_check(Path(ns.dir), ns.regen)
    for r in results:
        print(f"{'ok  ' if r.ok else 'FAIL'} {r.name}")
        for problem in r.problems:
            print(f"     {problem}")
    if missing:
        print(f"FAIL grammar coverage: no corpus file uses {', '.join(missing)}")
    return 0 if all(r.ok for r in results) and not missing else 1


COMMANDS = {
    "run": cmd_run,
    "serve": cmd_serve,
    "serve-actions": cmd_serve_actions,
    "bench": cmd_bench,
    "orchestrate": cmd_orchestrate,
    "corpus-check": cmd_corpus_check,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(ns, "verbose", False) else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[ns.command](ns)
    except JacetteError as exc:
        print(json.dumps({"error": exc.to_json()}), file=sys.stderr)
        return 1
    except (UsageError, ValueError, OSError) as exc:
        print(f"jacette: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
