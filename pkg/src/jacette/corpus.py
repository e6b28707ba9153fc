"""The shipped example corpus: programs, seed stores and golden outputs.

Layout, per entry ``<name>``:

- ``<name>.jac``          program source
- ``<name>.store.json``   seed graph, a JSON list of node/edge objects
- ``<name>.golden.json``  AST fingerprint and expected report (or error)

Entries without a store are checked for parse/print round-trip only.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import JacetteError
from .graph import Graph
from .lang import parse, pretty_print
from .lang import ast as A
from .runtime import Runtime

CORPUS_DIR = Path(__file__).with_name("corpus")

# Every production of the grammar; the parser marks each one it uses.
PRODUCTIONS = (
    "program", "node_decl", "edge_decl", "walker_decl", "access_clause", "has_stmt", "can_stmt",
    "stmt", "assign", "lvalue", "take", "spawn", "if", "forin", "report", "disengage", "expr_stmt",
)

# Which walker to run, from where, for each entry that has a store.
RUNS: dict[str, dict[str, Any]] = {
    "daily_summary": {"walker": "daily_summary", "start": "mon", "args": {}},
    "access_denied": {"walker": "analyze", "start": "r1", "args": {}},
    "count_chain": {"walker": "count", "start": "a", "args": {"n": 0}},
}


def fingerprint(program: A.Program) -> str:
    return hashlib.sha256(pretty_print(program).encode("utf-8")).hexdigest()


def load_store(graph: Graph, items: list[dict[str, Any]]) -> dict[str, int]:
    """Create the seed objects in one transaction; returns key -> object id."""
    keys: dict[str, int] = {}
    with graph.transaction() as s:
        for item in items:
            if item["kind"] == "node":
                if item["key"] in keys:
                    raise ValueError(f"duplicate store key {item['key']!r}")
                keys[item["key"]] = s.create_node(item["type"], item.get("context"))
            elif item["kind"] == "edge":
                s.create_edge(item["type"], keys[item["src"]], keys[item["dst"]], item.get("context"))
            else:
                raise ValueError(f"unknown store object kind {item['kind']!r}")
    return keys


@dataclass
class EntryResult:
    name: str
    ok: bool
    problems: list[str] = field(default_factory=list)
    productions: set[str] = field(default_factory=set)


def entry_names(directory: Path = CORPUS_DIR) -> list[str]:
    return sorted(p.stem for p in Path(directory).glob("*.jac"))


def execute(name: str, directory: Path = CORPUS_DIR, runtime_kwargs: Optional[dict] = None) -> dict[str, Any]:
    """Run an entry against a fresh in-memory store; returns the golden record."""
    directory = Path(directory)
    program = parse((directory / f"{name}.jac").read_text(encoding="utf-8"))
    run = RUNS[name]
    items = json.loads((directory / f"{name}.store.json").read_text(encoding="utf-8"))
    rt = Runtime(program, **(runtime_kwargs or {}))
    try:
        keys = load_store(rt.graph, items)
        record: dict[str, Any] = {"walker": run["walker"], "start": run["start"], "args": run["args"],
                                  "fingerprint": fingerprint(program)}
        try:
            record["report"] = rt.run_walker(run["walker"], keys[run["start"]], run["args"]).report
        except JacetteError as exc:
            record["error"] = exc.to_json()
        return record
    finally:
        rt.close()


def check_entry(name: str, directory: Path = CORPUS_DIR, regen: bool = False) -> EntryResult:
    directory = Path(directory)
    result = EntryResult(name, True)
    try:
        source = (directory / f"{name}.jac").read_text(encoding="utf-8")
        program = parse(source, trace=result.productions)
        printed = pretty_print(program)
        if parse(printed) != program:
            result.problems.append("round-trip changed the AST")
        if pretty_print(parse(printed)) != printed:
            result.problems.append("printing is not idempotent")
        if name in RUNS:
            golden_path = directory / f"{name}.golden.json"
            actual = execute(name, directory)
            if regen:
                golden_path.write_text(json.dumps(actual, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
            elif not golden_path.exists():
                result.problems.append("golden file missing (run with --regen)")
            else:
                expected = json.loads(golden_path.read_text(encoding="utf-8"))
                if expected != actual:
                    result.problems.append(
                        f"golden mismatch: expected {json.dumps(expected)} got {json.dumps(actual)}")
    except JacetteError as exc:
        result.problems.append(f"{type(exc).__name__}: {exc}")
    except (OSError, ValueError) as exc:
        result.problems.append(str(exc))
    result.ok = not result.problems
    return result


def missing_productions(results: list[EntryResult]) -> list[str]:
    covered = set().union(*(r.productions for r in results)) if results else set()
    return [p for p in PRODUCTIONS if p not in covered]


def corpus_check(directory: Path = CORPUS_DIR, regen: bool = False) -> tuple[list[EntryResult], list[str]]:
    """Check every entry; a failing entry does not stop the sweep."""
    results = [check_entry(name, directory, regen) for name in entry_names(directory)]
    return results, missing_productions(results)
