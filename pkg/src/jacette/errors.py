"""Exception hierarchy shared by every jacette subsystem.

All errors carry a ``to_json`` payload so the HTTP API and the CLI can
report them uniformly.
"""

from __future__ import annotations

from typing import Any


class JacetteError(Exception):
    """Base class for runtime errors surfaced to callers."""

    def __init__(self, message: str = "", **fields: Any) -> None:
        super().__init__(message)
        self.message = message
        self.fields = fields

    def to_json(self) -> dict[str, Any]:
        payload: dict[str, Any] = {"type": type(self).__name__, "message": self.message}
        payload.update(self.fields)
        return payload


# graph / storage

class UnknownType(JacetteError):
    pass


class UndeclaredField(JacetteError):
    pass


class DanglingEndpoint(JacetteError):
    pass


class NotFound(JacetteError):
    pass


class InvalidValue(JacetteError):
    """A value that is not a ContextValue (NaN, 65-bit int, tuple key...)."""


class IoFailure(JacetteError):
    pass


class ConflictError(JacetteError):
    """A commit lost an optimistic race with another session."""


# language

class JacSyntaxError(JacetteError):
    def __init__(self, line: int, col: int, expected: tuple[str, ...], found: str) -> None:
        exp = " or ".join(repr(e) for e in expected) if expected else "nothing"
        super().__init__(
            f"line {line}, col {col}: expected {exp}, found {found!r}",
            line=line, col=col, expected=list(expected), found=found,
        )
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found


class ResolutionError(JacetteError):
    def __init__(self, name: str, line: int, message: str = "") -> None:
        super().__init__(message or f"line {line}: cannot resolve {name!r}", name=name, line=line)
        self.name = name
        self.line = line


# walkers

class UnknownWalker(JacetteError):
    pass


class NotAWalker(JacetteError):
    pass


class AccessDenied(JacetteError):
    def __init__(self, walker: str, node_type: str, node_id: int) -> None:
        super().__init__(
            f"walker {walker!r} may not enter node {node_id} of type {node_type!r}",
            walker=walker, node_type=node_type, node_id=node_id,
        )
        self.walker = walker
        self.node_type = node_type


class RuntimeTypeError(JacetteError):
    pass


# actions / orchestration

class ActionFailure(JacetteError):
    def __init__(self, name: str, message: str) -> None:
        super().__init__(f"action {name!r} failed: {message}", name=name)
        self.name = name
        self.reason = message


class UnknownAction(JacetteError):
    pass


class BindFailure(JacetteError):
    pass


class NoFeasibleConfig(JacetteError):
    pass
