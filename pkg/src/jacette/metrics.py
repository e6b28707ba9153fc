"""In-process metrics recorder (the stand-in for a cluster metrics service)."""

from __future__ import annotations

import math
import statistics
import threading
import time
from collections import defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


def percentile(samples: Sequence[float], q: float) -> float:
    """Linear-interpolated percentile, ``q`` in [0, 100]."""
    if not samples:
        return math.nan
    data = sorted(samples)
    if len(data) == 1:
        return float(data[0])
    rank = (len(data) - 1) * q / 100.0
    lo = math.floor(rank)
    hi = math.ceil(rank)
    return data[lo] + (data[hi] - data[lo]) * (rank - lo)


@dataclass(frozen=True)
class MetricsWindow:
    count: int
    mean_us: float
    p99_us: float
    throughput_qps: float

    @classmethod
    def of(cls, latencies_us: Sequence[float], span_s: float) -> "MetricsWindow":
        if not latencies_us:
            return cls(0, math.nan, math.nan, 0.0)
        qps = len(latencies_us) / span_s if span_s > 0 else math.inf
        return cls(len(latencies_us), statistics.fmean(latencies_us), percentile(latencies_us, 99), qps)


@dataclass(frozen=True)
class RequestSample:
    start: float
    end: float
    latency_us: float
    tag: int
    clean: bool  # config tag unchanged for the whole request


class MetricsRecorder:
    """Bounded sliding history of action calls and end-to-end requests."""

    def __init__(self, maxlen: int = 100_000) -> None:
        self._lock = threading.Lock()
        self._actions: dict[tuple[str, str], deque] = defaultdict(lambda: deque(maxlen=maxlen))
        self._requests: deque[RequestSample] = deque(maxlen=maxlen)
        self._cond = threading.Condition(self._lock)

    def record_action(self, name: str, binding: str, latency_us: float) -> None:
        with self._lock:
            self._actions[(name, binding)].append((time.monotonic(), latency_us))

    def record_request(self, start: float, end: float, tag: int = 0, end_tag: Optional[int] = None) -> None:
        sample = RequestSample(start, end, (end - start) * 1e6, tag, end_tag is None or end_tag == tag)
        with self._cond:
            self._requests.append(sample)
            self._cond.notify_all()

    def action_counts(self) -> dict[tuple[str, str], int]:
        """Calls per (action, binding): the utilization signal."""
        with self._lock:
            return {k: len(v) for k, v in self._actions.items()}

    def action_window(self, name: str, binding: str, seconds: float = 60.0) -> MetricsWindow:
        cutoff = time.monotonic() - seconds
        with self._lock:
            lat = [lat for t, lat in self._actions.get((name, binding), ()) if t >= cutoff]
        return MetricsWindow.of(lat, seconds)

    def request_window(self, seconds: float = 60.0) -> MetricsWindow:
        now = time.monotonic()
        cutoff = now - seconds
        with self._lock:
            lat = [s.latency_us for s in self._requests if s.end >= cutoff]
        return MetricsWindow.of(lat, seconds)

    def requests(self, tag: Optional[int] = None, after: float = -math.inf) -> list[RequestSample]:
        with self._lock:
            return [s for s in self._requests
                    if s.start >= after and (tag is None or (s.tag == tag and s.clean))]

    def wait_for_requests(self, tag: int, after: float, count: int, timeout: float) -> list[RequestSample]:
        """Block until ``count`` clean requests tagged ``tag`` started after ``after``."""
        deadline = time.monotonic() + timeout
        with self._cond:
            while True:
                found = [s for s in self._requests if s.tag == tag and s.clean and s.start >= after]
                if len(found) >= count:
                    return found[:count]
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return found
                self._cond.wait(remaining)

    def all_requests(self) -> list[RequestSample]:
        with self._lock:
            return list(self._requests)


def window_of(samples: Iterable[RequestSample]) -> MetricsWindow:
    samples = list(samples)
    if not samples:
        return MetricsWindow(0, math.nan, math.nan, 0.0)
    span = max(s.end for s in samples) - min(s.start for s in samples)
    return MetricsWindow.of([s.latency_us for s in samples], span)
