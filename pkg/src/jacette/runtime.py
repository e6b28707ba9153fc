"""Runtime: a program, its graph, the live walker registry and the action table."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import dataclass, replace
from typing import Any, Optional

from .actions import ActionTable, default_manifest
from .errors import ConflictError, NotAWalker, ResolutionError, UnknownAction
from .graph import Graph, Schema, Session
from .lang import ast as A
from .lang import parse, resolve
from .metrics import MetricsRecorder
from .storage import Tally, TierConfig, TieredStore
from .walker import Interpreter, WalkerInstance, WalkerRegistry, new_instance

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    report: list[Any]
    status: str
    elapsed_us: float
    tally: Tally
    attempts: int = 1

    def to_json(self) -> dict[str, Any]:
        return {"report": self.report, "status": self.status, "elapsed_us": round(self.elapsed_us, 1)}


class Runtime:
    def __init__(self, program: A.Program, graph: Optional[Graph] = None,
                 actions: Optional[ActionTable] = None,
                 recorder: Optional[MetricsRecorder] = None,
                 tiers: Optional[TierConfig] = None,
                 max_attempts: int = 5) -> None:
        self.program = program
        self.recorder = recorder or MetricsRecorder()
        if graph is None:
            graph = Graph(Schema.from_program(program), TieredStore(tiers or TierConfig()))
        self.graph = graph
        if actions is None:
            actions = ActionTable(self.recorder)
            actions.register_entries(default_manifest())
        self.actions = actions
        self.registry = WalkerRegistry(program.walker_decls)
        self.max_attempts = max_attempts
        self._inject_lock = threading.Lock()

    # walker lifecycle

    def spawn_walker(self, name: str, start: int, args: Optional[dict[str, Any]] = None,
                     session: Optional[Session] = None) -> WalkerInstance:
        decl = self.registry.get(name)
        for action in decl.can_actions:
            if action not in self.actions:
                raise UnknownAction(f"walker {name!r} needs unregistered action {action!r}")
        (session or self.graph.session()).node(start)
        return new_instance(decl, start, args)

    def run(self, instance: WalkerInstance, session: Session) -> list[Any]:
        """Execute to completion, then commit (the commit point)."""
        try:
            report = Interpreter(instance, session, self.actions.call).run()
        except BaseException:
            session.discard()
            raise
        session.commit()
        return report

    def run_walker(self, name: str, start: int, args: Optional[dict[str, Any]] = None) -> RunResult:
        """Spawn and run one walker; retries the whole run if its commit
        loses a race with another writer."""
        tag = self.actions.version
        t0 = time.monotonic()
        attempt = 0
        while True:
            attempt += 1
            session = self.graph.session()
            try:
                inst = self.spawn_walker(name, start, args, session)
                report = self.run(inst, session)
                break
            except ConflictError:
                if attempt >= self.max_attempts:
                    raise
                log.debug("walker %s conflicted on commit, retry %d", name, attempt)
        t1 = time.monotonic()
        self.recorder.record_request(t0, t1, tag, self.actions.version)
        return RunResult(report, inst.status, (t1 - t0) * 1e6, session.tally, attempt)

    def inject_walker(self, source: str) -> str:
        program = parse(source, check=False)
        if program.node_decls or program.edge_decls or len(program.walker_decls) != 1:
            raise NotAWalker("source must declare exactly one walker and nothing else")
        resolve(program, base=self.program)
        decl = program.walker_decls[0]
        for action in decl.can_actions:
            if action not in self.actions:
                raise ResolutionError(action, decl.line, f"line {decl.line}: unknown action {action!r}")
        with self._inject_lock:
            self.registry.register(decl)
            self.program = replace(
                self.program,
                walker_decls=tuple(w for w in self.program.walker_decls if w.name != decl.name) + (decl,))
        log.info("injected walker %s (registry version %d)", decl.name, self.registry.version)
        return decl.name

    def remove_walker(self, name: str) -> None:
        with self._inject_lock:
            self.registry.remove(name)
            self.program = replace(
                self.program, walker_decls=tuple(w for w in self.program.walker_decls if w.name != name))
        log.info("removed walker %s", name)

    def close(self) -> None:
        self.actions.close()
