"""Runtime configuration: defaults < config file < JACETTE_* environment < flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping, Optional

from .jsorc import UNLIMITED, PolicyParams
from .storage import TierConfig

ENV_PREFIX = "JACETTE_"


@dataclass
class RuntimeConfig:
    store: Optional[str] = None
    cache_capacity: int = 1024
    fast_edge_threshold: int = 64
    port: int = 8080
    host: str = "127.0.0.1"
    actions_manifest: Optional[str] = None
    jsorc: bool = False
    epoch_interval: float = 30.0
    eval_window: int = 20
    mem_budget: int = UNLIMITED
    seed: int = 0
    out: str = "bench-out"

    def tiers(self) -> TierConfig:
        return TierConfig(self.cache_capacity, self.fast_edge_threshold, self.store)

    def policy(self) -> PolicyParams:
        return PolicyParams(epoch_interval_s=self.epoch_interval, eval_window=self.eval_window,
                            memory_budget_bytes=self.mem_budget)


FIELD_TYPES = {f.name: f.type for f in fields(RuntimeConfig)}


def _coerce(name: str, value: Any) -> Any:
    kind = FIELD_TYPES[name]
    if value is None:
        return None
    if kind == "bool":
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off", ""):
            return False
        raise ValueError(f"{name}: not a boolean: {value!r}")
    if kind == "int":
        if isinstance(value, bool):
            raise ValueError(f"{name}: not an integer: {value!r}")
        return int(value)
    if kind == "float":
        return float(value)
    return str(value)


def from_file(path: str | os.PathLike) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    out = {}
    for key, value in data.items():
        name = key.replace("-", "_")
        if name not in FIELD_TYPES:
            raise ValueError(f"unknown config key {key!r}")
        out[name] = _coerce(name, value)
    return out


def from_env(environ: Mapping[str, str]) -> dict[str, Any]:
    out = {}
    for name in FIELD_TYPES:
        key = ENV_PREFIX + name.upper()
        if key in environ:
            out[name] = _coerce(name, environ[key])
    return out


def resolve_config(flags: Mapping[str, Any], config_file: Optional[str | Path] = None,
                   environ: Optional[Mapping[str, str]] = None) -> RuntimeConfig:
    """Merge the layers; a flag counts only if it was given (not None)."""
    merged: dict[str, Any] = {}
    if config_file is not None:
        merged.update(from_file(config_file))
    merged.update(from_env(os.environ if environ is None else environ))
    merged.update({k: _coerce(k, v) for k, v in flags.items() if k in FIELD_TYPES and v is not None})
    return RuntimeConfig(**merged)
