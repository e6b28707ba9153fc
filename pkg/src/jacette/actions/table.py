"""Late-bound action dispatch.

Every action has one name and two possible bindings: an in-process
function or a remote endpoint speaking the line protocol. Callers only
use the name; :meth:`ActionTable.rebind` swaps the binding atomically,
so a call dispatched after the swap uses the new binding while calls
already in flight finish on the old one.
"""

from __future__ import annotations

import logging
import statistics
import threading
import time
from dataclasses import dataclass, replace
from typing import Any, Iterable, Optional, Union

from ..errors import ActionFailure, UnknownAction
from ..metrics import MetricsRecorder
from ..values import validate
from .builtins import ActionImpl, ManifestEntry
from .client import RemoteClient, TransportError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Local:
    def __str__(self) -> str:
        return "local"


@dataclass(frozen=True)
class Remote:
    host: str
    port: int

    def __str__(self) -> str:
        return "remote"


LOCAL = Local()
Binding = Union[Local, Remote]


@dataclass(frozen=True)
class ActionSpec:
    name: str
    binding: Binding = LOCAL
    mem_footprint_bytes: int = 0
    impl: Optional[ActionImpl] = None
    endpoint: Optional[Remote] = None  # where the remote flavour lives, if known
    profile_args: tuple = ()


@dataclass(frozen=True)
class ActionProfile:
    name: str
    local_latency_us: float
    remote_latency_us: float
    cc: float
    mem_footprint_bytes: int
    trials: int

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "local_latency_us": self.local_latency_us,
            "remote_latency_us": self.remote_latency_us,
            "cc": self.cc,
            "mem_footprint_bytes": self.mem_footprint_bytes,
            "trials": self.trials,
        }

    @classmethod
    def from_json(cls, d: dict[str, Any]) -> "ActionProfile":
        return cls(d["name"], float(d["local_latency_us"]), float(d["remote_latency_us"]),
                   float(d["cc"]), int(d["mem_footprint_bytes"]), int(d["trials"]))


class DelayInjector:
    """Simulated network cost added to every remote call."""

    def __init__(self) -> None:
        self._delays: dict[str, tuple[float, float]] = {}

    def set(self, name: str, fixed_ms: float, per_byte_us: float = 0.0) -> None:
        self._delays[name] = (fixed_ms, per_byte_us)

    def get(self, name: str) -> tuple[float, float]:
        return self._delays.get(name, (0.0, 0.0))

    def seconds(self, name: str, nbytes: int) -> float:
        fixed_ms, per_byte_us = self.get(name)
        return fixed_ms / 1e3 + per_byte_us * nbytes / 1e6


class ActionTable:
    def __init__(self, recorder: Optional[MetricsRecorder] = None,
                 delays: Optional[DelayInjector] = None,
                 retries: int = 2, timeout: float = 30.0) -> None:
        self.recorder = recorder
        self.delays = delays or DelayInjector()
        self.retries = retries
        self.timeout = timeout
        self._specs: dict[str, ActionSpec] = {}
        self._clients: dict[tuple[str, int], RemoteClient] = {}
        self._lock = threading.Lock()
        self.version = 0

    # registry

    def register(self, spec: ActionSpec) -> None:
        with self._lock:
            self._specs[spec.name] = spec
            self.version += 1

    def register_entries(self, entries: Iterable[ManifestEntry], endpoint: Optional[Remote] = None) -> None:
        for e in entries:
            self.register(ActionSpec(e.name, LOCAL, e.mem_footprint_bytes, e.impl(), endpoint,
                                     tuple(e.profile_args())))
            fixed, per_byte = e.delay()
            if fixed or per_byte:
                self.delays.set(e.name, fixed, per_byte)

    def names(self) -> list[str]:
        return list(self._specs)

    def __contains__(self, name: object) -> bool:
        return name in self._specs

    def spec(self, name: str) -> ActionSpec:
        try:
            return self._specs[name]
        except KeyError:
            raise UnknownAction(f"unknown action {name!r}") from None

    def binding(self, name: str) -> Binding:
        return self.spec(name).binding

    def rebind(self, name: str, binding: Binding) -> None:
        """Atomic swap; validity of a remote endpoint is checked at call time."""
        with self._lock:
            spec = self._specs.get(name)
            if spec is None:
                raise UnknownAction(f"unknown action {name!r}")
            endpoint = binding if isinstance(binding, Remote) else spec.endpoint
            self._specs[name] = replace(spec, binding=binding, endpoint=endpoint)
            self.version += 1

    def set_endpoint(self, name: str, endpoint: Optional[Remote]) -> None:
        with self._lock:
            self._specs[name] = replace(self.spec(name), endpoint=endpoint)

    # dispatch

    def call(self, name: str, args: list[Any]) -> Any:
        spec = self.spec(name)  # one read: the binding used for this whole call
        for a in args:
            validate(a)
        start = time.perf_counter()
        if isinstance(spec.binding, Remote):
            result = self._call_remote(spec, spec.binding, args)
        else:
            result = self._call_local(spec, args)
        if self.recorder is not None:
            self.recorder.record_action(name, str(spec.binding), (time.perf_counter() - start) * 1e6)
        return result

    def _call_local(self, spec: ActionSpec, args: list[Any]) -> Any:
        if spec.impl is None:
            raise ActionFailure(spec.name, "no local implementation")
        try:
            return validate(spec.impl(*args))
        except Exception as exc:
            raise ActionFailure(spec.name, f"{type(exc).__name__}: {exc}") from exc

    def _client(self, endpoint: Remote) -> RemoteClient:
        key = (endpoint.host, endpoint.port)
        with self._lock:
            client = self._clients.get(key)
            if client is None:
                client = self._clients[key] = RemoteClient(endpoint.host, endpoint.port, self.timeout)
            return client

    def _call_remote(self, spec: ActionSpec, endpoint: Remote, args: list[Any]) -> Any:
        client = self._client(endpoint)
        last: Optional[Exception] = None
        for _ in range(1 + self.retries):
            try:
                reply, nbytes = client.request(spec.name, args)
            except TransportError as exc:
                last = exc
                continue
            pause = self.delays.seconds(spec.name, nbytes)
            if pause > 0:
                time.sleep(pause)
            if not reply.get("ok"):
                raise ActionFailure(spec.name, str(reply.get("error")))
            return reply.get("result")
        raise ActionFailure(spec.name, f"remote unreachable after {self.retries} retries: {last}")

    def call_with(self, name: str, binding: Binding, args: list[Any]) -> Any:
        """Call through an explicit binding without touching the table."""
        spec = self.spec(name)
        if isinstance(binding, Remote):
            return self._call_remote(spec, binding, args)
        return self._call_local(spec, args)

    # profiling

    def profile(self, name: str, trials: int, args: Optional[list[Any]] = None) -> ActionProfile:
        """Median latency under each binding and their ratio (the CC)."""
        if trials < 1:
            raise ValueError("trials must be >= 1")
        spec = self.spec(name)
        endpoint = spec.binding if isinstance(spec.binding, Remote) else spec.endpoint
        if spec.impl is None or endpoint is None:
            raise ActionFailure(name, "profiling needs both a local implementation and a remote endpoint")
        call_args = list(spec.profile_args if args is None else args)
        medians = []
        for binding in (LOCAL, endpoint):
            samples = []
            for _ in range(trials):
                t0 = time.perf_counter()
                self.call_with(name, binding, call_args)
                samples.append((time.perf_counter() - t0) * 1e6)
            medians.append(statistics.median(samples))
        local_us, remote_us = medians
        local_us = max(local_us, 1e-3)
        return ActionProfile(name, local_us, remote_us, remote_us / local_us, spec.mem_footprint_bytes, trials)

    def close(self) -> None:
        with self._lock:
            clients, self._clients = list(self._clients.values()), {}
        for c in clients:
            c.close()
