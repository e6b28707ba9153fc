"""Three-tier object storage: working memory, LRU cache, persistent store.

Working memory belongs to a graph session (one walker run); the cache
and the persistent backend are shared. Every access that leaves working
memory is counted, which is what the fast-edge experiment measures.
"""

from __future__ import annotations

import json
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, MutableMapping, Optional

from .errors import IoFailure, NotFound
from .records import EdgeRecord, NodeRecord, Record, decode, encode

META_FILE = "_meta.json"

# Tombstone placed in a session's working memory for objects deleted in it.
GONE = object()


@dataclass(frozen=True)
class TierConfig:
    cache_capacity: int = 1024
    fast_edge_threshold: int = 64
    store_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.cache_capacity < 1:
            raise ValueError("cache_capacity must be >= 1")
        if self.fast_edge_threshold < 0:
            raise ValueError("fast_edge_threshold must be >= 0")


@dataclass(frozen=True)
class StoreStats:
    cache_hits: int = 0
    cache_misses: int = 0
    store_reads: int = 0
    store_writes: int = 0
    objects_fetched: int = 0
    evictions: int = 0

    def __sub__(self, other: "StoreStats") -> "StoreStats":
        return StoreStats(*(a - b for a, b in zip(self.astuple(), other.astuple())))

    def astuple(self) -> tuple[int, ...]:
        return (self.cache_hits, self.cache_misses, self.store_reads,
                self.store_writes, self.objects_fetched, self.evictions)


class Tally:
    """Per-session access counters, mirrored into the store totals."""

    __slots__ = ("cache_hits", "store_reads")

    def __init__(self) -> None:
        self.cache_hits = 0
        self.store_reads = 0

    @property
    def objects_fetched(self) -> int:
        return self.cache_hits + self.store_reads


class LRUCache:
    """Object-count bounded LRU map. ``keys()`` lists oldest first."""

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._data: OrderedDict[int, Any] = OrderedDict()

    def get(self, key: int, default: Any = None) -> Any:
        try:
            self._data.move_to_end(key)
        except KeyError:
            return default
        return self._data[key]

    def put(self, key: int, value: Any) -> Optional[int]:
        """Insert or refresh ``key``; return the evicted key, if any."""
        evicted = None
        if key in self._data:
            self._data.move_to_end(key)
        elif len(self._data) >= self.capacity:
            evicted, _ = self._data.popitem(last=False)
        self._data[key] = value
        assert len(self._data) <= self.capacity
        return evicted

    def discard(self, key: int) -> None:
        self._data.pop(key, None)

    def keys(self) -> list[int]:
        return list(self._data)

    def __contains__(self, key: object) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)


class DirectoryBackend:
    """One file per object; the filename is the decimal object id."""

    def __init__(self, path: str | os.PathLike) -> None:
        self.path = Path(path)
        try:
            self.path.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IoFailure(f"cannot create store directory {self.path}: {exc}") from exc

    def read(self, oid: int) -> Optional[bytes]:
        try:
            return (self.path / str(oid)).read_bytes()
        except FileNotFoundError:
            return None
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def write(self, oid: int, data: bytes) -> None:
        target = self.path / str(oid)
        tmp = self.path / f".{oid}.tmp"
        try:
            tmp.write_bytes(data)
            os.replace(tmp, target)
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def delete(self, oid: int) -> None:
        try:
            (self.path / str(oid)).unlink()
        except FileNotFoundError:
            pass
        except OSError as exc:
            raise IoFailure(str(exc)) from exc

    def ids(self) -> Iterator[int]:
        for entry in self.path.iterdir():
            if entry.name.isdigit():
                yield int(entry.name)

    def read_meta(self) -> Optional[dict[str, Any]]:
        try:
            return json.loads((self.path / META_FILE).read_text())
        except FileNotFoundError:
            return None

    def write_meta(self, meta: dict[str, Any]) -> None:
        tmp = self.path / (META_FILE + ".tmp")
        tmp.write_text(json.dumps(meta))
        os.replace(tmp, self.path / META_FILE)


class MemoryBackend:
    """Dict-backed stand-in for the directory; same accounting, no disk."""

    def __init__(self) -> None:
        self._files: dict[int, bytes] = {}
        self._meta: Optional[dict[str, Any]] = None

    def read(self, oid: int) -> Optional[bytes]:
        return self._files.get(oid)

    def write(self, oid: int, data: bytes) -> None:
        self._files[oid] = data

    def delete(self, oid: int) -> None:
        self._files.pop(oid, None)

    def ids(self) -> Iterator[int]:
        return iter(list(self._files))

    def read_meta(self) -> Optional[dict[str, Any]]:
        return self._meta

    def write_meta(self, meta: dict[str, Any]) -> None:
        self._meta = dict(meta)


class TieredStore:
    def __init__(self, config: TierConfig = TierConfig(), backend: Any = None) -> None:
        self.config = config
        if backend is None:
            backend = DirectoryBackend(config.store_path) if config.store_path else MemoryBackend()
        self.backend = backend
        self.cache = LRUCache(config.cache_capacity)
        self._lock = threading.Lock()
        self._hits = self._misses = self._reads = self._writes = self._evictions = 0
        self._versions: dict[int, int] = {}
        # fused edge id -> an endpoint node that carries it
        self._fused_home: dict[int, int] = {}
        self._home_scanned = False
        self._next_id = self._recover_next_id()

    def _recover_next_id(self) -> int:
        meta = self.backend.read_meta()
        if meta is not None:
            return int(meta["next_id"])
        top = 0
        for oid in self.backend.ids():
            top = max(top, oid)
            raw = self.backend.read(oid)
            if raw is not None:
                rec = decode(raw)
                if isinstance(rec, NodeRecord):
                    for e in rec.fused_edges:
                        top = max(top, e.id)
        return top + 1

    # identity

    def allocate_id(self) -> int:
        with self._lock:
            oid = self._next_id
            self._next_id += 1
            return oid

    def flush_meta(self) -> None:
        with self._lock:
            self.backend.write_meta({"next_id": self._next_id})

    def version(self, oid: int) -> int:
        return self._versions.get(oid, 0)

    # reads

    def fetch(self, oid: int, tally: Optional[Tally] = None) -> tuple[Record, int]:
        """Cache, then persistent store. Returns a fresh record and its version."""
        if oid == 0:
            raise NotFound("object id 0 is the null reference")
        with self._lock:
            raw = self.cache.get(oid)
            if raw is not None:
                self._hits += 1
                if tally is not None:
                    tally.cache_hits += 1
            else:
                self._misses += 1
                raw = self.backend.read(oid)
                if raw is None:
                    raise NotFound(f"object {oid} not found")
                self._reads += 1
                if tally is not None:
                    tally.store_reads += 1
                if self.cache.put(oid, raw) is not None:
                    self._evictions += 1
            version = self._versions.get(oid, 0)
        rec = decode(raw)
        self._note_homes(rec)
        return rec, version

    def _note_homes(self, rec: Record) -> None:
        if isinstance(rec, NodeRecord):
            for edge in rec.fused_edges:
                self._fused_home.setdefault(edge.id, rec.id)

    def fused_home(self, oid: int) -> Optional[int]:
        """The node file holding fused edge ``oid``, if any. Falls back to
        one uncounted scan of the store when the edge has not been seen."""
        home = self._fused_home.get(oid)
        if home is None and not self._home_scanned:
            with self._lock:
                self._home_scanned = True
                for nid in list(self.backend.ids()):
                    raw = self.backend.read(nid)
                    if raw is not None:
                        self._note_homes(decode(raw))
            home = self._fused_home.get(oid)
        return home

    def load_object(
        self,
        oid: int,
        memory: Optional[MutableMapping[int, Any]] = None,
        tally: Optional[Tally] = None,
        versions: Optional[dict[int, int]] = None,
    ) -> Record:
        """Resolve ``oid`` through memory, cache and store, in that order.

        Loading a node re-creates its fused edges in ``memory`` without
        any further fetches. Copies already in memory win over the
        stored ones, so in-session edits are never clobbered.
        """
        if memory is not None and oid in memory:
            rec = memory[oid]
            if rec is GONE:
                raise NotFound(f"object {oid} was deleted")
            return rec
        home = self._fused_home.get(oid)
        if home is not None:
            return self._load_fused(oid, home, memory, tally, versions)
        try:
            rec, version = self.fetch(oid, tally)
        except NotFound:
            home = self.fused_home(oid) if oid else None
            if home is None:
                raise
            return self._load_fused(oid, home, memory, tally, versions)
        if memory is None:
            return rec
        memory[oid] = rec
        if versions is not None:
            versions[oid] = version
        if isinstance(rec, NodeRecord) and rec.fused_edges:
            live: list[EdgeRecord] = []
            for edge in rec.fused_edges:
                existing = memory.get(edge.id)
                if existing is GONE:
                    continue
                if existing is None:
                    memory[edge.id] = edge
                    live.append(edge)
                else:
                    live.append(existing)
            rec.fused_edges = live
        return rec

    def _load_fused(self, oid: int, home: int, memory, tally, versions) -> Record:
        # A fused edge is reached through its endpoint node's file.
        try:
            node = self.load_object(home, memory, tally, versions)
        except NotFound:
            node = None
        if memory is not None and oid in memory:
            rec = memory[oid]
            if rec is GONE:
                raise NotFound(f"object {oid} was deleted")
            return rec
        for edge in getattr(node, "fused_edges", ()):
            if edge.id == oid:
                return edge
        self._fused_home.pop(oid, None)
        rec, version = self.fetch(oid, tally)  # promoted since: now standalone
        if memory is not None:
            memory[oid] = rec
            if versions is not None:
                versions[oid] = version
        return rec

    # writes

    def persist_object(self, record: Record) -> int:
        """Write one standalone object. Fast edges live inside their
        endpoint nodes and produce no file of their own."""
        if isinstance(record, EdgeRecord) and record.is_fast:
            self._fused_home.setdefault(record.id, record.src)
            return 0
        if isinstance(record, EdgeRecord):
            self._fused_home.pop(record.id, None)
        self._note_homes(record)
        raw = encode(record)
        with self._lock:
            self.backend.write(record.id, raw)
            self._writes += 1
            self._versions[record.id] = self._versions.get(record.id, 0) + 1
            if self.cache.put(record.id, raw) is not None:
                self._evictions += 1
        return 1

    def delete_object(self, oid: int) -> None:
        with self._lock:
            self.backend.delete(oid)
            self.cache.discard(oid)
            self._fused_home.pop(oid, None)
            self._versions[oid] = self._versions.get(oid, 0) + 1

    def stats_snapshot(self) -> StoreStats:
        with self._lock:
            return StoreStats(
                cache_hits=self._hits,
                cache_misses=self._misses,
                store_reads=self._reads,
                store_writes=self._writes,
                objects_fetched=self._hits + self._reads,
                evictions=self._evictions,
            )

    def iter_stored(self) -> Iterator[Record]:
        """Uncounted scan of the persistent tier, for audits and export."""
        for oid in sorted(self.backend.ids()):
            raw = self.backend.read(oid)
            if raw is not None:
                yield decode(raw)
