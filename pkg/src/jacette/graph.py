"""Graph data model: typed nodes and directed edges over a tiered store.

All reads and writes go through a :class:`Session`, which owns the
working-memory tier. A session's changes become visible to others only
when it commits; a commit that raced another writer on the same object
fails with :class:`ConflictError` and the caller retries.
"""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

from .errors import ConflictError, DanglingEndpoint, NotFound, UndeclaredField, UnknownType
from .records import EdgeRecord, NodeRecord, Record
from .storage import GONE, Tally, TieredStore
from .values import serialized_size, validate

DIRECTIONS = ("out", "in", "both")


@dataclass
class Schema:
    """Closed schema: declared ``has`` fields per node and edge type."""

    node_fields: dict[str, tuple[str, ...]] = field(default_factory=dict)
    edge_fields: dict[str, tuple[str, ...]] = field(default_factory=dict)
    node_access: dict[str, Optional[tuple[str, ...]]] = field(default_factory=dict)
    node_actions: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @classmethod
    def from_program(cls, program: Any) -> "Schema":
        return cls(
            node_fields={d.name: tuple(d.has_fields) for d in program.node_decls},
            edge_fields={d.name: tuple(d.has_fields) for d in program.edge_decls},
            node_access={d.name: d.access_walkers for d in program.node_decls},
            node_actions={d.name: tuple(d.can_actions) for d in program.node_decls},
        )


def build_context(kind: str, type_name: str, fields: tuple[str, ...], given: Optional[dict]) -> dict:
    given = given or {}
    for key in given:
        if key not in fields:
            raise UndeclaredField(f"{kind} type {type_name!r} has no field {key!r}", field=key)
    return {f: validate(given.get(f), f) for f in fields}


class Session:
    """Working memory for one unit of work (normally one walker run)."""

    def __init__(self, graph: "Graph") -> None:
        self.graph = graph
        self.store: TieredStore = graph.store
        self.schema: Schema = graph.schema
        self.memory: dict[int, Any] = {}
        self.tally = Tally()
        self._versions: dict[int, int] = {}
        self._dirty: set[int] = set()
        self._created: set[int] = set()
        self._deleted: set[int] = set()
        self.closed = False

    @property
    def threshold(self) -> int:
        return self.store.config.fast_edge_threshold

    # loading

    def load(self, oid: int) -> Record:
        return self.store.load_object(oid, self.memory, self.tally, self._versions)

    def node(self, oid: int) -> NodeRecord:
        rec = self.load(oid)
        if not isinstance(rec, NodeRecord):
            raise NotFound(f"object {oid} is not a node")
        return rec

    def edge(self, oid: int) -> EdgeRecord:
        rec = self.load(oid)
        if not isinstance(rec, EdgeRecord):
            raise NotFound(f"object {oid} is not an edge")
        return rec

    # structure

    def create_node(self, type_name: str, context: Optional[dict] = None) -> int:
        fields = self.schema.node_fields.get(type_name)
        if fields is None:
            raise UnknownType(f"unknown node type {type_name!r}")
        ctx = build_context("node", type_name, fields, context)
        oid = self.store.allocate_id()
        access = self.schema.node_access.get(type_name)
        self.memory[oid] = NodeRecord(oid, type_name, ctx, access_list=access)
        self._created.add(oid)
        self._dirty.add(oid)
        return oid

    def create_edge(self, type_name: str, src: int, dst: int, context: Optional[dict] = None) -> int:
        fields = self.schema.edge_fields.get(type_name)
        if fields is None:
            raise UnknownType(f"unknown edge type {type_name!r}")
        ctx = build_context("edge", type_name, fields, context)
        ends = []
        for end in (src, dst):
            try:
                ends.append(self.node(end))
            except NotFound:
                raise DanglingEndpoint(f"edge endpoint {end} does not resolve to a node") from None
        src_rec, dst_rec = ends
        oid = self.store.allocate_id()
        edge = EdgeRecord(oid, type_name, ctx, src, dst, serialized_size(ctx) < self.threshold)
        if edge.is_fast:
            src_rec.fused_edges.append(edge)
            if dst != src:
                dst_rec.fused_edges.append(edge)
        else:
            src_rec.out_edges.append(oid)
            dst_rec.in_edges.append(oid)
        self.memory[oid] = edge
        self._created.add(oid)
        self._dirty.update((oid, src, dst))
        return oid

    def delete_node(self, oid: int) -> int:
        node = self.node(oid)
        removed: dict[int, EdgeRecord] = {}
        for eid in node.out_edges + node.in_edges:
            removed[eid] = self.edge(eid)
        for edge in node.fused_edges:
            removed[edge.id] = edge
        for eid, edge in removed.items():
            other_id = edge.other(oid)
            if other_id != oid:
                other = self.node(other_id)
                if edge.is_fast:
                    other.fused_edges = [e for e in other.fused_edges if e.id != eid]
                else:
                    other.out_edges = [x for x in other.out_edges if x != eid]
                    other.in_edges = [x for x in other.in_edges if x != eid]
                self._dirty.add(other_id)
            self._tombstone(eid)
        self._tombstone(oid)
        return 1 + len(removed)

    def _tombstone(self, oid: int) -> None:
        self.memory[oid] = GONE
        self._dirty.discard(oid)
        if oid in self._created:
            self._created.discard(oid)
        else:
            self._deleted.add(oid)

    def neighbors(self, oid: int, direction: str = "out",
                  edge_type: Optional[str] = None) -> list[tuple[EdgeRecord, int]]:
        """Incident edges and the node across each, ascending by edge id.

        Fused and standalone edges are returned identically.
        """
        if direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}")
        node = self.node(oid)
        want_out = direction in ("out", "both")
        want_in = direction in ("in", "both")
        found: dict[int, EdgeRecord] = {}
        ids = (node.out_edges if want_out else []) + (node.in_edges if want_in else [])
        for eid in ids:
            found[eid] = self.edge(eid)
        for edge in node.fused_edges:
            if (want_out and edge.src == oid) or (want_in and edge.dst == oid):
                found[edge.id] = edge
        result = []
        for eid in sorted(found):
            edge = found[eid]
            if edge_type is not None and edge.type_name != edge_type:
                continue
            if direction == "out":
                other = edge.dst
            elif direction == "in":
                other = edge.src
            else:
                other = edge.other(oid)
            result.append((edge, other))
        return result

    # context

    def get_field(self, oid: int, key: str) -> Any:
        rec = self.load(oid)
        if key not in rec.context:
            raise UndeclaredField(f"{rec.kind} type {rec.type_name!r} has no field {key!r}", field=key)
        return rec.context[key]

    def set_field(self, oid: int, key: str, value: Any) -> None:
        rec = self.load(oid)
        if key not in rec.context:
            raise UndeclaredField(f"{rec.kind} type {rec.type_name!r} has no field {key!r}", field=key)
        rec.context[key] = validate(value, key)
        self._dirty.add(oid)

    # commit point

    def commit(self) -> int:
        """Flush dirty objects to the store; returns files written."""
        if self.closed:
            raise RuntimeError("session already closed")
        writes = 0
        with self.graph.lock:
            self._reevaluate_fast_edges()
            for oid in sorted(self._dirty | self._deleted):
                if oid in self._created:
                    continue
                if oid in self._versions and self.store.version(oid) != self._versions[oid]:
                    raise ConflictError(f"object {oid} changed since it was loaded", object_id=oid)
            for oid in sorted(self._deleted):
                self.store.delete_object(oid)
            for oid in sorted(self._dirty):
                rec = self.memory.get(oid)
                if rec is None or rec is GONE:
                    continue
                writes += self.store.persist_object(rec)
            if self._dirty or self._deleted:
                self.store.flush_meta()
        self.closed = True
        return writes

    def _reevaluate_fast_edges(self) -> None:
        # A fused edge lives in both endpoint files, so editing one means
        # rewriting both; outgrowing the threshold promotes it to standalone.
        for oid in sorted(self._dirty):
            rec = self.memory.get(oid)
            if not isinstance(rec, EdgeRecord) or not rec.is_fast:
                continue
            ends = {rec.src, rec.dst}
            for end in ends:
                self.node(end)
                self._dirty.add(end)
            if serialized_size(rec.context) >= self.threshold:
                rec.is_fast = False
                src = self.node(rec.src)
                dst = self.node(rec.dst)
                src.fused_edges = [e for e in src.fused_edges if e.id != oid]
                dst.fused_edges = [e for e in dst.fused_edges if e.id != oid]
                src.out_edges.append(oid)
                dst.in_edges.append(oid)

    def discard(self) -> None:
        self.closed = True
        self.memory.clear()

    @property
    def has_changes(self) -> bool:
        return bool(self._dirty or self._deleted)


class Graph:
    """A schema plus a tiered store; hands out sessions."""

    def __init__(self, schema: Schema, store: TieredStore) -> None:
        self.schema = schema
        self.store = store
        self.lock = threading.RLock()

    def session(self) -> Session:
        return Session(self)

    @contextmanager
    def transaction(self) -> Iterator[Session]:
        s = self.session()
        try:
            yield s
        except BaseException:
            s.discard()
            raise
        s.commit()

    # auto-committing conveniences

    def create_node(self, type_name: str, context: Optional[dict] = None) -> int:
        with self.transaction() as s:
            return s.create_node(type_name, context)

    def create_edge(self, type_name: str, src: int, dst: int, context: Optional[dict] = None) -> int:
        with self.transaction() as s:
            return s.create_edge(type_name, src, dst, context)

    def delete_node(self, oid: int) -> int:
        with self.transaction() as s:
            return s.delete_node(oid)

    def set_field(self, oid: int, key: str, value: Any) -> None:
        with self.transaction() as s:
            s.set_field(oid, key, value)

    def neighbors(self, oid: int, direction: str = "out",
                  edge_type: Optional[str] = None) -> list[tuple[EdgeRecord, int]]:
        return self.session().neighbors(oid, direction, edge_type)

    def get(self, oid: int) -> Record:
        return self.session().load(oid)

    def audit(self) -> list[str]:
        """Full referential-integrity check of the persistent tier."""
        problems: list[str] = []
        nodes: dict[int, NodeRecord] = {}
        edges: dict[int, EdgeRecord] = {}
        for rec in self.store.iter_stored():
            (nodes if isinstance(rec, NodeRecord) else edges)[rec.id] = rec
        for nid, node in nodes.items():
            if node.access_list is not None and not node.access_list:
                problems.append(f"node {nid}: empty access list")
            if list(node.context) != list(self.schema.node_fields.get(node.type_name, ())):
                problems.append(f"node {nid}: context keys differ from declared fields")
            for eid in node.out_edges:
                e = edges.get(eid)
                if e is None or e.src != nid:
                    problems.append(f"node {nid}: out edge {eid} missing or misdirected")
            for eid in node.in_edges:
                e = edges.get(eid)
                if e is None or e.dst != nid:
                    problems.append(f"node {nid}: in edge {eid} missing or misdirected")
            for fe in node.fused_edges:
                if nid not in (fe.src, fe.dst):
                    problems.append(f"node {nid}: fused edge {fe.id} not incident")
                other = nodes.get(fe.other(nid))
                if other is None:
                    problems.append(f"node {nid}: fused edge {fe.id} dangles")
                elif fe.to_json() not in [x.to_json() for x in other.fused_edges]:
                    problems.append(f"node {nid}: fused edge {fe.id} copies disagree")
        for eid, e in edges.items():
            if e.src == 0 or e.dst == 0 or e.src not in nodes or e.dst not in nodes:
                problems.append(f"edge {eid}: dangling endpoint")
                continue
            if eid not in nodes[e.src].out_edges or eid not in nodes[e.dst].in_edges:
                problems.append(f"edge {eid}: not listed by its endpoints")
        return problems
