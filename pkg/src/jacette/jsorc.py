"""Componentization orchestrator.

Profiles each action (local vs. remote latency), then periodically runs an
evaluation phase over every feasible local/remote configuration using live
traffic and applies the best one by rebinding actions.

A configuration is a bitmask over the ordered action list: bit i set means
action i is bound Local. It is feasible when the memory footprints of its
local actions fit the budget; all-remote costs nothing and is always
feasible.
"""

from __future__ import annotations

import json
import logging
import math
import os
import statistics
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

from .actions import LOCAL, ActionProfile, ActionServer, ActionTable, Remote
from .errors import JacetteError, NoFeasibleConfig
from .metrics import MetricsRecorder, RequestSample, percentile

log = logging.getLogger(__name__)

OBJECTIVES = ("avg_latency", "p99", "throughput")
UNLIMITED = 1 << 62


@dataclass(frozen=True)
class ComponentConfig:
    mask: int
    n: int

    def is_local(self, i: int) -> bool:
        return bool(self.mask >> i & 1)

    @property
    def local_count(self) -> int:
        return bin(self.mask).count("1")

    def footprint(self, profiles: Sequence[ActionProfile]) -> int:
        return sum(p.mem_footprint_bytes for i, p in enumerate(profiles) if self.mask >> i & 1)

    def feasible(self, profiles: Sequence[ActionProfile], budget: int) -> bool:
        return self.footprint(profiles) <= budget

    def __str__(self) -> str:
        return format(self.mask, f"0{max(self.n, 1)}b")


def footprint(mask: int, profiles: Sequence[ActionProfile]) -> int:
    return ComponentConfig(mask, len(profiles)).footprint(profiles)


def feasible_masks(profiles: Sequence[ActionProfile], budget: int) -> list[int]:
    if budget < 0:
        raise NoFeasibleConfig(f"memory budget {budget} is negative")
    return [m for m in range(1 << len(profiles)) if footprint(m, profiles) <= budget]


@dataclass(frozen=True)
class PolicyParams:
    epoch_interval_s: float = 30.0
    eval_window: int = 20  # requests observed per candidate config
    memory_budget_bytes: int = UNLIMITED
    objective: str = "avg_latency"
    max_exhaustive: int = 12
    tie_threshold: float = 0.02
    eval_timeout_s: float = 10.0

    def __post_init__(self) -> None:
        if self.eval_window < 1:
            raise ValueError("eval_window must be >= 1")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}")
        if self.epoch_interval_s <= 0:
            raise ValueError("epoch_interval_s must be positive")


def cost_of(latencies_us: Sequence[float], span_s: float, objective: str) -> float:
    """Lower is better for every objective (throughput is inverted)."""
    if not latencies_us:
        return math.inf
    if objective == "avg_latency":
        return statistics.fmean(latencies_us)
    if objective == "p99":
        return percentile(latencies_us, 99)
    qps = len(latencies_us) / span_s if span_s > 0 else math.inf
    return 1.0 / qps if qps > 0 else math.inf


def pick_best(scores: dict[int, float], tie_threshold: float) -> int:
    """Lowest cost; anything within ``tie_threshold`` of it counts as a tie,
    broken by fewer local actions, then lower mask."""
    best = min(scores.values())
    tied = [m for m, s in scores.items() if s <= best * (1 + tie_threshold)]
    return min(tied, key=lambda m: (bin(m).count("1"), m))


def greedy_config(profiles: Sequence[ActionProfile], budget: int) -> int:
    """Knapsack fallback: localize the highest-cc actions first while they fit."""
    if budget < 0:
        raise NoFeasibleConfig(f"memory budget {budget} is negative")
    mask = 0
    used = 0
    order = sorted(range(len(profiles)), key=lambda i: (-profiles[i].cc, i))
    for i in order:
        p = profiles[i]
        if p.cc <= 1.0:
            break  # remote is already no slower
        if used + p.mem_footprint_bytes <= budget:
            mask |= 1 << i
            used += p.mem_footprint_bytes
    return mask


@dataclass
class Solution:
    mask: int
    phase: str  # exhaustive | greedy
    scores: dict[int, float]


def solve_config(profiles: Sequence[ActionProfile], measure: Callable[[int], float],
                 params: PolicyParams, budget: Optional[int] = None) -> Solution:
    """Evaluate every feasible config with ``measure`` (cost, lower is
    better) and return the best; above ``max_exhaustive`` actions fall back
    to the greedy knapsack without measuring."""
    budget = params.memory_budget_bytes if budget is None else budget
    if len(profiles) > params.max_exhaustive:
        return Solution(greedy_config(profiles, budget), "greedy", {})
    scores = {}
    for mask in feasible_masks(profiles, budget):
        scores[mask] = measure(mask)
    finite = {m: s for m, s in scores.items() if math.isfinite(s)}
    if not finite:
        raise JacetteError("no configuration could be measured")
    return Solution(pick_best(finite, params.tie_threshold), "exhaustive", scores)


# profiling

def save_profiles(profiles: Sequence[ActionProfile], path: str | Path) -> None:
    """Atomic: the file either holds the full list or is left untouched."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".profiles-", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump([p.to_json() for p in profiles], fh, indent=2)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load_profiles(path: str | Path) -> list[ActionProfile]:
    with open(path, encoding="utf-8") as fh:
        return [ActionProfile.from_json(d) for d in json.load(fh)]


def analyze_application(table: ActionTable, names: Sequence[str], trials: int,
                        profile_path: str | Path | None = None) -> list[ActionProfile]:
    profiles = [table.profile(name, trials) for name in names]
    if profile_path is not None:
        save_profiles(profiles, profile_path)
    return profiles


# the pod-scheduler substitute

class EndpointManager:
    """Keeps a remote endpoint available for each action that needs one.

    Actions that already know an external endpoint use it; otherwise an
    in-process action server is started for the action and stopped again
    once the action is bound Local.
    """

    def __init__(self, table: ActionTable, host: str = "127.0.0.1") -> None:
        self.table = table
        self.host = host
        self._servers: dict[str, ActionServer] = {}
        self._lock = threading.Lock()

    def ensure(self, name: str) -> Remote:
        with self._lock:
            server = self._servers.get(name)
            if server is not None:
                return Remote(self.host, server.port)
            spec = self.table.spec(name)
            if spec.endpoint is not None:
                return spec.endpoint
            if spec.impl is None:
                raise JacetteError(f"action {name!r} has neither an endpoint nor an implementation")
            server = ActionServer({name: spec.impl}, 0, self.host).start()
            self._servers[name] = server
            log.info("started endpoint for %s on port %d", name, server.port)
            return Remote(self.host, server.port)

    def release(self, name: str) -> None:
        with self._lock:
            server = self._servers.pop(name, None)
        if server is not None:
            self.table.set_endpoint(name, None)
            server.shutdown()

    def close(self) -> None:
        with self._lock:
            servers, self._servers = list(self._servers.items()), {}
        for _, server in servers:
            server.shutdown()


class Applier:
    """Moves the action table from one config to another without ever
    passing through an infeasible state.

    Local->Remote flips go first, so every intermediate local set is a
    subset of the target's.
    """

    def __init__(self, table: ActionTable, names: Sequence[str], profiles: Sequence[ActionProfile],
                 endpoints: Optional[EndpointManager] = None, release_remote: bool = False) -> None:
        self.table = table
        self.names = list(names)
        self.profiles = list(profiles)
        self.endpoints = endpoints
        self.release_remote = release_remote
        self.violations = 0

    def current(self) -> int:
        mask = 0
        for i, name in enumerate(self.names):
            if self.table.binding(name) == LOCAL:
                mask |= 1 << i
        return mask

    def _check(self, budget: int) -> None:
        used = footprint(self.current(), self.profiles)
        if used > budget:
            self.violations += 1
            raise AssertionError(f"infeasible config applied: {used} bytes over budget {budget}")

    def apply(self, mask: int, budget: int) -> None:
        if footprint(mask, self.profiles) > budget:
            raise NoFeasibleConfig(f"config {mask:b} does not fit budget {budget}")
        now = self.current()
        to_remote = [i for i in range(len(self.names)) if now >> i & 1 and not mask >> i & 1]
        to_local = [i for i in range(len(self.names)) if mask >> i & 1 and not now >> i & 1]
        for i in to_remote:
            name = self.names[i]
            endpoint = self.endpoints.ensure(name) if self.endpoints else self.table.spec(name).endpoint
            if endpoint is None:
                raise JacetteError(f"no remote endpoint for action {name!r}")
            self.table.rebind(name, endpoint)
        if to_remote:
            self._check(budget)
        for i in to_local:
            name = self.names[i]
            self.table.rebind(name, LOCAL)
            if self.endpoints and self.release_remote:
                self.endpoints.release(name)
        self._check(budget)


class LiveMeasure:
    """Scores the config currently applied using real requests that both
    started and finished under it."""

    def __init__(self, table: ActionTable, recorder: MetricsRecorder, params: PolicyParams) -> None:
        self.table = table
        self.recorder = recorder
        self.params = params

    def __call__(self) -> tuple[float, list[RequestSample]]:
        tag = self.table.version
        after = time.monotonic()
        samples = self.recorder.wait_for_requests(tag, after, self.params.eval_window, self.params.eval_timeout_s)
        if len(samples) < self.params.eval_window:
            return math.inf, samples
        span = max(s.end for s in samples) - min(s.start for s in samples)
        return cost_of([s.latency_us for s in samples], span, self.params.objective), samples


@dataclass
class Decision:
    timestamp: float
    phase: str
    config_mask: int
    objective_value: Optional[float]
    applied: bool

    def to_json(self) -> dict[str, Any]:
        d = asdict(self)
        if d["objective_value"] is not None and not math.isfinite(d["objective_value"]):
            d["objective_value"] = None
        return d


class DecisionLog:
    """Append-only JSON-lines log (kept in memory too)."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path else None
        self.entries: list[Decision] = []
        self._lock = threading.Lock()

    def append(self, decision: Decision) -> None:
        with self._lock:
            self.entries.append(decision)
            if self.path is not None:
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(decision.to_json()) + "\n")


class Orchestrator:
    """Background controller: every epoch, evaluate and apply."""

    def __init__(self, table: ActionTable, names: Sequence[str], profiles: Sequence[ActionProfile],
                 params: PolicyParams, *, recorder: Optional[MetricsRecorder] = None,
                 measure: Optional[Callable[[int], float]] = None,
                 endpoints: Optional[EndpointManager] = None,
                 log_path: str | Path | None = None) -> None:
        if [p.name for p in profiles] != list(names):
            raise ValueError("profiles must cover the actions in order")
        self.table = table
        self.names = list(names)
        self.profiles = list(profiles)
        self.params = params
        self.applier = Applier(table, names, profiles, endpoints)
        self._live = LiveMeasure(table, recorder, params) if recorder is not None else None
        self._measure = measure
        self.log = DecisionLog(log_path)
        self.epochs = 0
        self.failures = 0
        self.last_good = self.applier.current()
        self.applied_at: Optional[float] = None  # monotonic time of the last applied decision
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    @property
    def budget(self) -> int:
        return self.params.memory_budget_bytes

    @property
    def current_mask(self) -> int:
        return self.applier.current()

    def _score(self, mask: int) -> float:
        # Called with the lock held by step().
        self.applier.apply(mask, self.budget)
        if self._measure is not None:
            value = self._measure(mask)
        elif self._live is not None:
            value, _ = self._live()
        else:
            raise JacetteError("orchestrator has no way to measure configurations")
        self.log.append(Decision(time.time(), "evaluate", mask, value, False))
        return value

    def step(self) -> int:
        """One epoch: evaluation phase, then apply the winner."""
        with self._lock:
            self.epochs += 1
            try:
                solution = solve_config(self.profiles, self._score, self.params)
                self.applier.apply(solution.mask, self.budget)
            except AssertionError:
                raise
            except Exception as exc:
                self.failures += 1
                log.warning("evaluation phase failed, keeping %s: %s", self.last_good, exc)
                if footprint(self.last_good, self.profiles) > self.budget:
                    self.last_good = self._safe_subset(self.last_good)
                self.applier.apply(self.last_good, self.budget)
                return self.last_good
            self.last_good = solution.mask
            self.applied_at = time.monotonic()
            value = solution.scores.get(solution.mask)
            self.log.append(Decision(time.time(), solution.phase, solution.mask, value, True))
            return solution.mask

    def _safe_subset(self, mask: int) -> int:
        """Drop local actions, lowest cc first, until the budget is met."""
        order = sorted((i for i in range(len(self.profiles)) if mask >> i & 1),
                       key=lambda i: (self.profiles[i].cc, -i))
        for i in order:
            if footprint(mask, self.profiles) <= self.budget:
                break
            mask &= ~(1 << i)
        return mask

    def set_budget(self, budget: int) -> None:
        """Change the budget; demote immediately if the applied config no longer fits."""
        if budget < 0:
            raise NoFeasibleConfig(f"memory budget {budget} is negative")
        with self._lock:
            self.params = replace(self.params, memory_budget_bytes=budget)
            now = self.applier.current()
            if footprint(now, self.profiles) > budget:
                safe = self._safe_subset(now)
                self.applier.apply(safe, budget)
                self.last_good = safe
                self.log.append(Decision(time.time(), "safety", safe, None, True))

    # background loop

    def _loop(self) -> None:
        while not self._stop.is_set():
            try:
                self.step()
            except Exception:
                log.exception("orchestrator epoch crashed")
            self._stop.wait(self.params.epoch_interval_s)

    def start(self) -> "Orchestrator":
        self._stop.clear()
        self._thread = threading.Thread(target=self._loop, name="jsorc", daemon=True)
        self._thread.start()
        return self

    def stop(self, timeout: Optional[float] = None) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout)
            self._thread = None

    def status(self) -> dict[str, Any]:
        last = next((d for d in reversed(self.log.entries) if d.applied), None)
        return {
            "actions": self.names,
            "config_mask": self.current_mask,
            "config": str(ComponentConfig(self.current_mask, len(self.names))),
            "memory_budget_bytes": self.budget,
            "epochs": self.epochs,
            "failures": self.failures,
            "last_decision": last.to_json() if last else None,
        }
