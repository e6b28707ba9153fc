"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines also show
up in the terminal summary of a full run.
"""

import json
import random
import re
import shutil
import signal
import subprocess
import sys
import threading
import time
import urllib.error
import urllib.request

import pytest

from opsgen import run_sequence
from test_actions import CASES, _exchange, _transcript
from test_jsorc import RebindAudit, analytic, fake_table, oracle, profiles_for
from test_storage import run_lru_trace
from jacette.actions import BUILTINS, LOCAL, ActionServer, ActionTable, Remote, default_manifest, impls_for
from jacette.bench import ActionRig, WorkloadSpec, bench_config_sweep, bench_fast_edge, bench_orchestrator
from jacette.corpus import CORPUS_DIR, corpus_check
from jacette.errors import JacetteError
from jacette.jsorc import Orchestrator, PolicyParams, feasible_masks, footprint
from jacette.lang import parse, pretty_print
from jacette.lang.fuzz import random_program

RESULTS = []


@pytest.fixture
def verdict(capsys):
    """Call with (criterion, ok, detail); prints the line and asserts."""
    def record(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        RESULTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return record


def test_ac1_fast_edge_fetch_ratio(verdict):
    t0 = time.monotonic()
    spec = WorkloadSpec(mix={"walk": 1.0}, requests=3, graph_size=1000, chain_fanout=0)
    result = bench_fast_edge(spec, thresholds=(64,), on_disk=True)
    off = next(r for r in result.rows if r["fusion_threshold"] == 0)
    on = next(r for r in result.rows if r["fusion_threshold"] == 64)
    ratio = on["objects_fetched"] / off["objects_fetched"]
    elapsed = time.monotonic() - t0
    analytic_ratio = 1000 / 1999
    verdict("AC1 fast-edge fetch ratio", ratio <= 0.55 and elapsed < 30,
            f"fused/unfused = {on['objects_fetched']}/{off['objects_fetched']} = {ratio:.4f} "
            f"(analytic {analytic_ratio:.4f}, bound 0.55), {elapsed:.1f}s")


def test_ac2_fusion_transparency(verdict):
    t0 = time.monotonic()
    mismatched, broken = [], []
    for seed in range(10_000):
        off, p_off = run_sequence(seed, 0)
        on, p_on = run_sequence(seed, 64)
        if off != on:
            mismatched.append(seed)
        if p_off or p_on:
            broken.append(seed)
    elapsed = time.monotonic() - t0
    verdict("AC2 fusion transparency", not mismatched and not broken and elapsed < 120,
            f"10000 sequences, {len(mismatched)} report mismatches, {len(broken)} audit failures, {elapsed:.1f}s")


def test_ac3_config_sweep_shape(verdict):
    t0 = time.monotonic()
    compute, delays = 2.0, [1.0, 2.0, 3.0, 4.0, 5.0]
    result, groups = bench_config_sweep(WorkloadSpec(requests=10), n_actions=5, compute_ms=compute,
                                        delay_ms=delays, warmup=2)
    medians = [g["median"] for g in groups]
    monotone = all(a >= b for a, b in zip(medians, medians[1:]))
    rows = {r["config_mask"]: r for r in result.rows}
    all_remote, all_local = rows[0]["mean_us"], rows[31]["mean_us"]
    min_cc = min((compute + d) / compute for d in delays)
    bound = all_remote / min_cc
    elapsed = time.monotonic() - t0
    verdict("AC3 config sweep shape",
            len(result.rows) == 32 and monotone and all_local <= bound * 1.10 and elapsed < 300,
            f"group medians (us) {[round(m) for m in medians]} non-increasing={monotone}; "
            f"all-local {all_local:.0f}us vs bound {bound:.0f}us (+10%), {elapsed:.1f}s")


def _trial_setup(rng):
    """Draw a stationary scenario whose analytic optimum is clear of the runner-up."""
    while True:
        n = rng.randint(2, 3)
        compute = [rng.choice([0.5, 1.0, 1.5]) for _ in range(n)]
        delays = [rng.choice([0.0, 1.0, 3.0, 6.0]) for _ in range(n)]
        mems = [rng.choice([10, 20, 30]) for _ in range(n)]
        budget = rng.choice([0, 20, 30, 50, 1000])
        # analytic profile: local = compute, remote = compute + delay
        profs = profiles_for([c * 1000 for c in compute], [(c + d) * 1000 for c, d in zip(compute, delays)], mems)
        measure = analytic(profs)
        costs = sorted((measure(m), m) for m in feasible_masks(profs, budget))
        if len(costs) < 2 or costs[1][0] >= costs[0][0] * 1.25:
            return compute, delays, mems, budget, profs


def test_ac4_jsorc_optimality(verdict):
    t0 = time.monotonic()
    rng = random.Random(2024)
    hits, log = 0, []
    for trial in range(20):
        compute, delays, mems, budget, profs = _trial_setup(rng)
        expected = oracle(profs, budget)
        rig = ActionRig(compute, delays, footprints=mems)
        stop = threading.Event()
        try:
            rig.profile(trials=3)
            orch = Orchestrator(rig.table, rig.names, rig.profiles,
                                PolicyParams(memory_budget_bytes=budget, eval_window=8, epoch_interval_s=3600),
                                recorder=rig.recorder, endpoints=rig.endpoints)

            def load():
                while not stop.is_set():
                    rig.request()

            driver = threading.Thread(target=load, daemon=True)
            driver.start()
            got = orch.step()
            got_again = orch.step()
        finally:
            stop.set()
            driver.join(10)
            rig.close()
        ok = got == expected and got_again == expected
        hits += ok
        log.append(f"{trial}:{got:b}/{expected:b}")
    elapsed = time.monotonic() - t0
    verdict("AC4 jsorc optimality", hits >= 19 and elapsed < 300,
            f"{hits}/20 trials applied the oracle optimum ({' '.join(log)}), {elapsed:.1f}s")


def test_ac5_jsorc_speedup(verdict):
    t0 = time.monotonic()
    result = bench_orchestrator(WorkloadSpec(requests=300), n_actions=2, compute_ms=5.0, cc=3.0,
                                params=PolicyParams(epoch_interval_s=3600.0, eval_window=10))
    rows = {r["policy"]: r for r in result.rows}
    jsorc, upper = rows["jsorc"], rows["all_local"]
    mean_up, p99_up, bound = jsorc["speedup_mean"], jsorc["speedup_p99"], upper["speedup_mean"]
    elapsed = time.monotonic() - t0
    ok = mean_up >= 2.0 and mean_up <= bound * 1.02 and p99_up <= mean_up and elapsed < 300
    verdict("AC5 jsorc speedup", ok,
            f"steady mean speedup {mean_up:.2f}x (floor 2.0, all-local bound {bound:.2f}x +2%), "
            f"p99 speedup {p99_up:.2f}x <= mean, steady requests {jsorc['steady_requests']}, {elapsed:.1f}s")


def test_ac6_budget_safety(verdict):
    rng = random.Random(6)
    n = 5
    profs = profiles_for([rng.uniform(5, 20) for _ in range(n)], [rng.uniform(20, 80) for _ in range(n)],
                         [rng.randint(10, 60) for _ in range(n)])
    names = [p.name for p in profs]
    table = fake_table(profs)
    budget_ref = [10**9]
    audit = RebindAudit(table, names, profs, budget_ref)
    noise = random.Random(7)

    def measure(mask):
        if noise.random() < 0.02:
            raise JacetteError("measurement failed")
        return analytic(profs)(mask) * noise.uniform(0.9, 1.1)

    orch = Orchestrator(table, names, profs, PolicyParams(memory_budget_bytes=budget_ref[0]), measure=measure)
    infeasible_states = 0
    for epoch in range(1000):
        if rng.random() < 0.5:
            new_budget = rng.choice([0, rng.randint(0, 120), rng.randint(0, 400)])
            # the audit follows the stricter budget while the demotion runs
            budget_ref[0] = max(new_budget, footprint(orch.current_mask, profs))
            orch.set_budget(new_budget)
            budget_ref[0] = new_budget
            if footprint(orch.current_mask, profs) > new_budget:
                infeasible_states += 1
        orch.step()
        if footprint(orch.current_mask, profs) > orch.budget:
            infeasible_states += 1
    count = audit.bad + orch.applier.violations + infeasible_states
    verdict("AC6 budget safety", count == 0 and orch.epochs == 1000,
            f"1000 epochs, {orch.failures} failed evaluations, infeasible applications = {count}")


def test_ac7_lru_conformance(verdict):
    t0 = time.monotonic()
    try:
        run_lru_trace(seed=7, ops=100_000, capacity=64, keyspace=256)
        ok, detail = True, "100000 ops matched the reference model state-for-state"
    except AssertionError as exc:
        ok, detail = False, f"diverged: {exc}"
    verdict("AC7 LRU conformance", ok, f"{detail}, {time.monotonic() - t0:.1f}s")


def test_ac8_parser_properties(verdict):
    t0 = time.monotonic()
    bad = []
    for seed in range(10_000):
        prog = random_program(seed)
        printed = pretty_print(prog)
        again = parse(printed)
        if again != prog or pretty_print(again) != printed:
            bad.append(seed)
    results, missing = corpus_check()
    failing = [r.name for r in results if not r.ok]
    verdict("AC8 parser properties", not bad and not failing and not missing,
            f"10000 generated ASTs, {len(bad)} round-trip/idempotence failures; corpus {len(results)} entries, "
            f"failing={failing}, uncovered productions={missing}, {time.monotonic() - t0:.1f}s")


def test_ac9_protocol_conformance(verdict):
    requests, responses = _transcript()
    with ActionServer(BUILTINS) as server:
        got = _exchange(server.port, b"".join(requests), len(responses))
    golden_ok = got == responses
    table = ActionTable()
    table.register_entries(default_manifest())
    diffs = []
    with ActionServer(impls_for(default_manifest())) as server:
        remote = Remote("127.0.0.1", server.port)
        for name, arg_sets in CASES.items():
            for args in arg_sets:
                a = json.dumps(table.call_with(name, LOCAL, args), ensure_ascii=False)
                b = json.dumps(table.call_with(name, remote, args), ensure_ascii=False)
                if a != b:
                    diffs.append((name, args))
    table.close()
    verdict("AC9 protocol conformance", golden_ok and not diffs,
            f"{len(responses)} golden exchanges byte-exact={golden_ok} (malformed and unknown-action included); "
            f"binding transparency mismatches={len(diffs)}")


def _http(port, method, path, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(f"http://127.0.0.1:{port}{path}", data=data, method=method)
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())


def test_ac10_live_injection(verdict, tmp_path):
    exe = shutil.which("jacette")
    cmd = [exe] if exe else [sys.executable, "-m", "jacette.cli"]
    store = CORPUS_DIR / "daily_summary.store.json"
    proc = subprocess.Popen([*cmd, "serve", "--port", "0", "--load", str(store)],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    steps = []
    try:
        line = proc.stdout.readline()
        port = int(re.search(r":(\d+)\s*$", line).group(1))
        pid_before = proc.pid
        keys = {item["key"]: i + 1 for i, item in
                enumerate(x for x in json.loads(store.read_text()) if x["kind"] == "node")}
        start = keys["mon"]

        def existing_ok():
            return _http(port, "POST", "/walker/run", {"walker": "list_days", "start_node": start})[0] == 200

        source = "walker " + (CORPUS_DIR / "daily_summary.jac").read_text().split("walker ", 1)[1]
        golden = json.loads((CORPUS_DIR / "daily_summary.golden.json").read_text())["report"]
        steps.append(("existing walker before", existing_ok()))
        steps.append(("inject", _http(port, "POST", "/walker/inject", {"source": source}) ==
                      (200, {"walker": "daily_summary"})))
        steps.append(("existing walker after inject", existing_ok()))
        code, body = _http(port, "POST", "/walker/run", {"walker": "daily_summary", "start_node": start})
        steps.append(("run matches golden", code == 200 and body["report"] == golden))
        steps.append(("remove", _http(port, "DELETE", "/walker/daily_summary")[0] == 200))
        code, body = _http(port, "POST", "/walker/run", {"walker": "daily_summary", "start_node": start})
        steps.append(("UnknownWalker after remove", code == 404 and body["error"]["type"] == "UnknownWalker"))
        steps.append(("existing walker after remove", existing_ok()))
        steps.append(("no restart", proc.poll() is None and proc.pid == pid_before))
    finally:
        proc.send_signal(signal.SIGTERM)
        try:
            code = proc.wait(15)
        except subprocess.TimeoutExpired:
            proc.kill()
            code = None
    steps.append(("clean shutdown", code == 0))
    failed = [name for name, ok in steps if not ok]
    verdict("AC10 live injection", not failed,
            f"{len(steps) - len(failed)}/{len(steps)} steps ok" + (f", failed: {failed}" if failed else ""))
