"""Node and edge records plus their on-disk encoding.

A stored object is two lines: a header ``{"kind":...,"type_name":...}``
and the canonical JSON body of the record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Optional, Union

from .values import canonical


@dataclass
class EdgeRecord:
    id: int
    type_name: str
    context: dict[str, Any]
    src: int
    dst: int
    is_fast: bool = False

    kind = "edge"

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "type_name": self.type_name,
            "context": self.context,
            "src": self.src,
            "dst": self.dst,
            "is_fast": self.is_fast,
        }

    def semantic(self) -> dict[str, Any]:
        """Everything except the storage-tier flag."""
        body = self.to_json()
        del body["is_fast"]
        return body

    @classmethod
    def from_json(cls, body: dict[str, Any]) -> "EdgeRecord":
        return cls(body["id"], body["type_name"], body["context"], body["src"], body["dst"], body["is_fast"])

    def other(self, node_id: int) -> int:
        return self.dst if self.src == node_id else self.src


@dataclass
class NodeRecord:
    id: int
    type_name: str
    context: dict[str, Any]
    out_edges: list[int] = field(default_factory=list)
    in_edges: list[int] = field(default_factory=list)
    access_list: Optional[tuple[str, ...]] = None
    fused_edges: list[EdgeRecord] = field(default_factory=list)

    kind = "node"

    def to_json(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "type_name": self.type_name,
            "context": self.context,
            "out_edges": list(self.out_edges),
            "in_edges": list(self.in_edges),
            "access_list": list(self.access_list) if self.access_list is not None else None,
            "fused_edges": [e.to_json() for e in self.fused_edges],
        }

    @classmethod
    def from_json(cls, body: dict[str, Any]) -> "NodeRecord":
        access = body["access_list"]
        return cls(
            body["id"],
            body["type_name"],
            body["context"],
            list(body["out_edges"]),
            list(body["in_edges"]),
            tuple(access) if access is not None else None,
            [EdgeRecord.from_json(e) for e in body["fused_edges"]],
        )


Record = Union[NodeRecord, EdgeRecord]


def encode(record: Record) -> bytes:
    header = canonical({"kind": record.kind, "type_name": record.type_name})
    return (header + "\n" + canonical(record.to_json())).encode("utf-8")


def decode(data: bytes) -> Record:
    header_line, _, body_line = data.decode("utf-8").partition("\n")
    header = json.loads(header_line)
    body = json.loads(body_line)
    if header["kind"] == "node":
        return NodeRecord.from_json(body)
    if header["kind"] == "edge":
        return EdgeRecord.from_json(body)
    raise ValueError(f"unknown object kind {header['kind']!r}")
