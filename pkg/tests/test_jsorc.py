import json
import random
import socket
import time

import pytest
from hypothesis import given, settings, strategies as st

from jacette.actions import LOCAL, ActionProfile, ActionServer, ActionSpec, ActionTable, Remote, impls_for, synth_manifest
from jacette.errors import ActionFailure, JacetteError, NoFeasibleConfig
from jacette.jsorc import (UNLIMITED, Applier, ComponentConfig, EndpointManager, Orchestrator, PolicyParams,
                           analyze_application, cost_of, feasible_masks, footprint, greedy_config, load_profiles,
                           pick_best, save_profiles, solve_config)

DUMMY = Remote("127.0.0.1", 9)


def profiles_for(local_us, remote_us, mems):
    return [ActionProfile(f"a{i}", l, r, r / l, m, 5) for i, (l, r, m) in enumerate(zip(local_us, remote_us, mems))]


def analytic(profiles):
    """Per-request latency of a pipeline calling every action once."""
    def measure(mask):
        return sum(p.local_latency_us if mask >> i & 1 else p.remote_latency_us for i, p in enumerate(profiles))
    return measure


def oracle(profiles, budget, tie=0.02):
    """Independent brute force over all 2^n masks."""
    measure = analytic(profiles)
    scored = []
    for mask in range(1 << len(profiles)):
        used = sum(p.mem_footprint_bytes for i, p in enumerate(profiles) if mask >> i & 1)
        if used <= budget:
            scored.append((measure(mask), mask))
    best = min(s for s, _ in scored)
    tied = [m for s, m in scored if s <= best * (1 + tie)]
    return min(tied, key=lambda m: (bin(m).count("1"), m))


def fake_table(profiles):
    table = ActionTable()
    for p in profiles:
        table.register(ActionSpec(p.name, DUMMY, p.mem_footprint_bytes, impl=lambda: None, endpoint=DUMMY))
    return table


def test_config_helpers():
    c = ComponentConfig(0b101, 3)
    assert c.is_local(0) and not c.is_local(1) and c.local_count == 2
    assert str(c) == "101"
    profs = profiles_for([1, 1, 1], [2, 2, 2], [10, 20, 30])
    assert c.footprint(profs) == 40
    assert feasible_masks(profs, 25) == [0, 1, 2]
    with pytest.raises(NoFeasibleConfig):
        feasible_masks(profs, -1)


def test_all_local_best_when_it_fits():
    profs = profiles_for([10, 10], [30, 40], [100, 100])
    sol = solve_config(profs, analytic(profs), PolicyParams())
    assert sol.mask == 0b11 and sol.phase == "exhaustive"


def test_zero_budget_means_all_remote():
    profs = profiles_for([10, 10], [30, 40], [100, 100])
    assert solve_config(profs, analytic(profs), PolicyParams(), budget=0).mask == 0


def test_budget_picks_bigger_win():
    profs = profiles_for([10, 10], [30, 40], [100, 100])
    assert solve_config(profs, analytic(profs), PolicyParams(), budget=150).mask == 0b10


def test_tie_prefers_fewer_local_then_lower_mask():
    assert pick_best({0b00: 100.0, 0b01: 99.0, 0b10: 98.5, 0b11: 98.4}, 0.02) == 0b00
    assert pick_best({0b01: 100.0, 0b10: 100.0, 0b11: 50.0}, 0.02) == 0b11
    assert pick_best({0b01: 100.0, 0b10: 100.5}, 0.02) == 0b01


@settings(max_examples=200, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_solver_matches_brute_force(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 6)
    local = [rng.uniform(1, 50) for _ in range(n)]
    profs = profiles_for(local, [l * rng.uniform(0.5, 5) for l in local], [rng.randint(0, 100) for _ in range(n)])
    budget = rng.choice([0, 50, 120, 250, UNLIMITED])
    assert solve_config(profs, analytic(profs), PolicyParams(), budget).mask == oracle(profs, budget)


def test_greedy_above_exhaustive_limit():
    rng = random.Random(7)
    n = 14
    local = [10.0] * n
    remote = [10.0 * rng.uniform(0.8, 4) for _ in range(n)]
    profs = profiles_for(local, remote, [10] * n)
    calls = []
    sol = solve_config(profs, lambda m: calls.append(m) or 1.0, PolicyParams(max_exhaustive=12), budget=50)
    assert sol.phase == "greedy" and calls == []
    order = sorted((i for i in range(n) if profs[i].cc > 1), key=lambda i: -profs[i].cc)[:5]
    assert sol.mask == sum(1 << i for i in order)


def test_greedy_skips_actions_not_faster_locally():
    profs = profiles_for([10, 10], [9, 30], [1, 1])
    assert greedy_config(profs, UNLIMITED) == 0b10


def test_cost_objectives():
    lat = [float(x) for x in range(1, 101)]
    assert cost_of(lat, 1.0, "avg_latency") == pytest.approx(50.5)
    assert cost_of(lat, 1.0, "p99") == pytest.approx(99.01, abs=0.01)
    assert cost_of(lat, 2.0, "throughput") == pytest.approx(1 / 50)
    assert cost_of([], 1.0, "avg_latency") == float("inf")
    with pytest.raises(ValueError):
        PolicyParams(objective="fastest")
    with pytest.raises(ValueError):
        PolicyParams(eval_window=0)


def test_profiles_round_trip(tmp_path):
    profs = profiles_for([1.5, 2.0], [3.0, 8.0], [10, 20])
    path = tmp_path / "p.json"
    save_profiles(profs, path)
    assert load_profiles(path) == profs


def test_profile_write_is_atomic_on_unreachable_server(tmp_path):
    path = tmp_path / "profiles.json"
    path.write_text("previous contents")
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    dead = Remote("127.0.0.1", sock.getsockname()[1])
    sock.close()
    table = ActionTable(retries=0, timeout=1.0)
    table.register(ActionSpec("a", impl=lambda: 1, endpoint=dead))
    with pytest.raises(ActionFailure):
        analyze_application(table, ["a"], 2, path)
    assert path.read_text() == "previous contents"
    assert [p.name for p in tmp_path.iterdir()] == ["profiles.json"]


def test_profiles_follow_injected_delays(tmp_path):
    entries = synth_manifest([2.0] * 5, [1.0, 3.0, 5.0, 7.0, 9.0])
    table = ActionTable()
    table.register_entries(entries)
    with ActionServer(impls_for(entries)) as server:
        for e in entries:
            table.set_endpoint(e.name, Remote("127.0.0.1", server.port))
        profs = analyze_application(table, [e.name for e in entries], 5, tmp_path / "p.json")
        table.close()
    ccs = [p.cc for p in profs]
    assert ccs == sorted(ccs)
    assert json.loads((tmp_path / "p.json").read_text())[0]["name"] == "model0"


class RebindAudit:
    """Checks the footprint after every single rebind, not just per phase."""

    def __init__(self, table, names, profiles, budget_ref):
        self.table, self.names, self.profiles, self.budget_ref = table, names, profiles, budget_ref
        self.bad = 0
        original = table.rebind

        def rebind(name, binding):
            original(name, binding)
            mask = sum(1 << i for i, n in enumerate(names) if table.binding(n) == LOCAL)
            if footprint(mask, profiles) > budget_ref[0]:
                self.bad += 1

        table.rebind = rebind


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**32))
def test_applier_never_passes_through_infeasible_state(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 6)
    profs = profiles_for([1.0] * n, [2.0] * n, [rng.randint(1, 50) for _ in range(n)])
    names = [p.name for p in profs]
    table = fake_table(profs)
    budget = [0]
    audit = RebindAudit(table, names, profs, budget)
    applier = Applier(table, names, profs)
    for _ in range(20):
        new_budget = rng.randint(0, 200)
        if footprint(applier.current(), profs) > new_budget:
            # demotion starts over budget by definition; audit it against the old one
            applier.apply(0, budget[0])
        budget[0] = new_budget
        applier.apply(rng.choice(feasible_masks(profs, new_budget)), new_budget)
    assert audit.bad == 0 and applier.violations == 0


def test_applier_refuses_infeasible_target():
    profs = profiles_for([1.0], [2.0], [100])
    applier = Applier(fake_table(profs), ["a0"], profs)
    with pytest.raises(NoFeasibleConfig):
        applier.apply(0b1, 50)


def test_orchestrator_converges_and_logs(tmp_path):
    profs = profiles_for([10, 10, 10], [30, 12, 50], [10, 10, 10])
    table = fake_table(profs)
    log_path = tmp_path / "decisions.jsonl"
    orch = Orchestrator(table, [p.name for p in profs], profs, PolicyParams(memory_budget_bytes=20),
                        measure=analytic(profs), log_path=log_path)
    assert orch.step() == oracle(profs, 20) == 0b101
    assert orch.step() == 0b101
    assert orch.current_mask == 0b101
    lines = [json.loads(l) for l in log_path.read_text().splitlines()]
    assert {"timestamp", "phase", "config_mask", "objective_value", "applied"} <= set(lines[0])
    assert sum(1 for l in lines if l["applied"]) == 2
    st_ = orch.status()
    assert st_["config"] == "101" and st_["epochs"] == 2


def test_orchestrator_follows_a_delay_flip():
    profs = profiles_for([10, 10], [30, 40], [10, 10])
    state = {"profs": profs}

    def measure(mask):
        return analytic(state["profs"])(mask)

    orch = Orchestrator(fake_table(profs), ["a0", "a1"], profs, PolicyParams(memory_budget_bytes=10), measure=measure)
    first = orch.step()
    assert first == 0b10
    # action 0's network delay grows tenfold: its remote cost now dominates
    state["profs"] = profiles_for([10, 10], [300, 40], [10, 10])
    second = orch.step()
    assert second == oracle(state["profs"], 10) == 0b01
    assert bin(first ^ second).count("1") == 2  # the budget allows one local, so the pair swaps


def test_orchestrator_keeps_last_good_on_failure():
    profs = profiles_for([10, 10], [30, 40], [10, 10])
    calls = {"n": 0}

    def flaky(mask):
        calls["n"] += 1
        if calls["n"] > 4:
            raise JacetteError("measurement blew up")
        return analytic(profs)(mask)

    orch = Orchestrator(fake_table(profs), ["a0", "a1"], profs, PolicyParams(), measure=flaky)
    assert orch.step() == 0b11
    assert orch.step() == 0b11
    assert orch.failures == 1 and orch.current_mask == 0b11


def test_set_budget_demotes_lowest_cc_first():
    profs = profiles_for([10, 10, 10], [20, 50, 30], [10, 10, 10])
    orch = Orchestrator(fake_table(profs), [p.name for p in profs], profs, PolicyParams(), measure=analytic(profs))
    assert orch.step() == 0b111
    orch.set_budget(20)
    assert orch.current_mask == 0b110  # a0 (cc 2) went first
    orch.set_budget(10)
    assert orch.current_mask == 0b010
    assert orch.log.entries[-1].phase == "safety"
    with pytest.raises(NoFeasibleConfig):
        orch.set_budget(-1)
    assert orch.applier.violations == 0


def test_orchestrator_thread_start_stop():
    profs = profiles_for([10], [30], [10])
    orch = Orchestrator(fake_table(profs), ["a0"], profs, PolicyParams(epoch_interval_s=0.01), measure=analytic(profs))
    orch.start()
    deadline = time.monotonic() + 5
    while orch.epochs < 3 and time.monotonic() < deadline:
        time.sleep(0.01)
    orch.stop(5)
    assert orch.epochs >= 3 and orch.current_mask == 1


def test_endpoint_manager_starts_and_releases():
    table = ActionTable()
    table.register(ActionSpec("dbl", impl=lambda x: 2 * x))
    mgr = EndpointManager(table)
    remote = mgr.ensure("dbl")
    assert mgr.ensure("dbl") == remote
    table.rebind("dbl", remote)
    assert table.call("dbl", [4]) == 8
    table.rebind("dbl", LOCAL)
    mgr.release("dbl")
    mgr.close()
    table.close()


def test_profiles_must_match_names():
    profs = profiles_for([1], [2], [1])
    with pytest.raises(ValueError):
        Orchestrator(fake_table(profs), ["zzz"], profs, PolicyParams(), measure=analytic(profs))
