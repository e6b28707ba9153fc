"""Built-in action library and the action manifest loader.

The AI models of a real deployment are replaced by ``synth`` (busy-work
for a fixed time, then a payload of a fixed size) and ``summarize`` (first
sentence of its input).
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

ActionImpl = Callable[..., Any]


def concat(*parts: Any) -> str:
    for p in parts:
        if not isinstance(p, str):
            raise TypeError("concat takes strings")
    return "".join(parts)


_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")


def summarize(text: Any) -> str:
    if not isinstance(text, str):
        raise TypeError("summarize takes a string")
    text = text.strip()
    m = _SENTENCE_END.search(text)
    return text[: m.end()] if m else text


def synth(compute_ms: Any = 0, payload_bytes: Any = 0) -> str:
    if isinstance(compute_ms, bool) or not isinstance(compute_ms, (int, float)) or compute_ms < 0:
        raise TypeError("compute_ms must be a non-negative number")
    if isinstance(payload_bytes, bool) or not isinstance(payload_bytes, int) or payload_bytes < 0:
        raise TypeError("payload_bytes must be a non-negative integer")
    deadline = time.perf_counter() + compute_ms / 1000.0
    while time.perf_counter() < deadline:
        pass
    return "x" * payload_bytes


def upper(s: Any) -> str:
    if not isinstance(s, str):
        raise TypeError("upper takes a string")
    return s.upper()


def length(v: Any) -> int:
    if not isinstance(v, (str, list, dict)):
        raise TypeError("length takes a string, list or map")
    return len(v)


def echo(*args: Any) -> Any:
    return args[0] if len(args) == 1 else list(args)


BUILTINS: dict[str, ActionImpl] = {
    "concat": concat,
    "summarize": summarize,
    "synth": synth,
    "upper": upper,
    "length": length,
    "echo": echo,
}

# Fixed arguments used when profiling an action.
PROFILE_ARGS: dict[str, list[Any]] = {
    "concat": ["a", "b"],
    "summarize": ["First sentence. Second sentence."],
    "synth": [1, 16],
    "upper": ["abc"],
    "length": ["abc"],
    "echo": ["x"],
}


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    mem_footprint_bytes: int
    kind: str = "builtin"  # builtin | synth
    params: dict[str, Any] = field(default_factory=dict)

    def impl(self) -> ActionImpl:
        if self.kind == "synth":
            compute = self.params.get("compute_ms", 0)
            payload = self.params.get("payload_bytes", 0)

            def bound(*args: Any) -> str:
                return synth(*args) if args else synth(compute, payload)

            bound.__name__ = self.name
            return bound
        if self.kind == "builtin":
            target = self.params.get("impl", self.name)
            if target not in BUILTINS:
                raise ValueError(f"no builtin action named {target!r}")
            return BUILTINS[target]
        raise ValueError(f"unknown action kind {self.kind!r}")

    def profile_args(self) -> list[Any]:
        if "profile_args" in self.params:
            return list(self.params["profile_args"])
        if self.kind == "synth":
            return []
        return list(PROFILE_ARGS.get(self.params.get("impl", self.name), []))

    def delay(self) -> tuple[float, float]:
        """Injected network delay: (fixed ms, microseconds per byte)."""
        return float(self.params.get("delay_ms", 0.0)), float(self.params.get("per_byte_us", 0.0))

    def to_json(self) -> dict[str, Any]:
        return {"name": self.name, "mem_footprint_bytes": self.mem_footprint_bytes,
                "kind": self.kind, "params": self.params}


def default_manifest() -> list[ManifestEntry]:
    return [ManifestEntry(name, 1 << 20) for name in BUILTINS]


def parse_manifest(items: list[dict[str, Any]]) -> list[ManifestEntry]:
    entries = []
    seen = set()
    for item in items:
        entry = ManifestEntry(item["name"], int(item.get("mem_footprint_bytes", 0)),
                              item.get("kind", "builtin"), dict(item.get("params", {})))
        if entry.name in seen:
            raise ValueError(f"duplicate action {entry.name!r} in manifest")
        entry.impl()  # fail early on bad kinds
        seen.add(entry.name)
        entries.append(entry)
    return entries


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    with open(path, encoding="utf-8") as fh:
        return parse_manifest(json.load(fh))


def impls_for(entries: list[ManifestEntry]) -> dict[str, ActionImpl]:
    return {e.name: e.impl() for e in entries}


def synth_manifest(compute_ms: list[float], delay_ms: list[float], *,
                   payload_bytes: int = 16, footprint: int = 100 << 20,
                   prefix: str = "model") -> list[ManifestEntry]:
    """A suite of synthetic model actions, one per (compute, delay) pair."""
    return [
        ManifestEntry(f"{prefix}{i}", footprint, "synth",
                      {"compute_ms": c, "payload_bytes": payload_bytes, "delay_ms": d})
        for i, (c, d) in enumerate(zip(compute_ms, delay_ms))
    ]
