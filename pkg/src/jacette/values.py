"""Context values and their canonical byte form.

The canonical form is compact UTF-8 JSON with keys kept in insertion
order. Python's float ``repr`` is already the shortest round-trip
decimal, which ``json`` reuses, so ``json.dumps`` with the right
separators is exactly the canonical encoder.
"""

from __future__ import annotations

import json
import math
from typing import Any, Union

from .errors import InvalidValue

ContextValue = Union[None, bool, int, float, str, list, dict]

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1


def validate(value: Any, path: str = "$") -> Any:
    """Raise InvalidValue unless ``value`` is a well-formed ContextValue."""
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, int):
        if not INT_MIN <= value <= INT_MAX:
            raise InvalidValue(f"{path}: integer {value} outside 64-bit range")
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidValue(f"{path}: non-finite float")
        return value
    if isinstance(value, list):
        for i, item in enumerate(value):
            validate(item, f"{path}[{i}]")
        return value
    if isinstance(value, dict):
        for key, item in value.items():
            if not isinstance(key, str):
                raise InvalidValue(f"{path}: map key {key!r} is not a string")
            validate(item, f"{path}.{key}")
        return value
    raise InvalidValue(f"{path}: unsupported type {type(value).__name__}")


def canonical(value: Any) -> str:
    return json.dumps(value, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def canonical_bytes(value: Any) -> bytes:
    return canonical(value).encode("utf-8")


def serialized_size(value: Any) -> int:
    """Byte length of the canonical encoding; the fast-edge size metric."""
    return len(canonical_bytes(value))


def strict_equal(a: Any, b: Any) -> bool:
    """Equality that keeps booleans distinct from numbers."""
    if isinstance(a, bool) or isinstance(b, bool):
        return type(a) is type(b) and a == b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(strict_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(strict_equal(a[k], b[k]) for k in a)
    return type(a) is type(b) and a == b
