"""Walker instances, the live walker registry, and the tree-walking interpreter.

A walker sees exactly two scopes: its own ``has`` fields and the context
of the node it is currently on (``here``). Traversal is breadth-first;
each node is visited at most once per run.
"""

from __future__ import annotations

import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from .errors import AccessDenied, JacetteError, RuntimeTypeError, UndeclaredField, UnknownWalker
from .graph import Session
from .lang import ast as A
from .values import INT_MAX, INT_MIN, strict_equal, validate

TAKE_DIRECTIONS = {"-->": "out", "<--": "in", "<-->": "both"}


class ScopeViolation(AssertionError):
    """The interpreter touched context outside its walker's scope."""


class WalkerRegistry:
    """Walker name -> declaration. Readers never lock: every mutation
    publishes a fresh dict."""

    def __init__(self, decls: Iterable[A.WalkerDecl] = ()) -> None:
        self._entries: dict[str, A.WalkerDecl] = {d.name: d for d in decls}
        self._lock = threading.Lock()
        self.version = 0

    def register(self, decl: A.WalkerDecl) -> None:
        with self._lock:
            entries = dict(self._entries)
            entries[decl.name] = decl
            self._entries = entries
            self.version += 1

    def remove(self, name: str) -> None:
        with self._lock:
            if name not in self._entries:
                raise UnknownWalker(f"no walker named {name!r}", walker=name)
            entries = dict(self._entries)
            del entries[name]
            self._entries = entries
            self.version += 1

    def get(self, name: str) -> A.WalkerDecl:
        try:
            return self._entries[name]
        except KeyError:
            raise UnknownWalker(f"no walker named {name!r}", walker=name) from None

    def names(self) -> list[str]:
        return sorted(self._entries)

    def __contains__(self, name: object) -> bool:
        return name in self._entries


@dataclass
class WalkerInstance:
    walker_type: str
    decl: A.WalkerDecl
    state: dict[str, Any]
    queue: deque = field(default_factory=deque)
    visited: set[int] = field(default_factory=set)
    current: int = 0
    status: str = "running"
    report: list[Any] = field(default_factory=list)
    seen: set[int] = field(default_factory=set)  # visited or already queued


def new_instance(decl: A.WalkerDecl, start: int, args: Optional[dict[str, Any]] = None) -> WalkerInstance:
    args = args or {}
    for key in args:
        if key not in decl.has_fields:
            raise UndeclaredField(f"walker {decl.name!r} has no field {key!r}", field=key)
    state = {f: validate(args.get(f), f) for f in decl.has_fields}
    return WalkerInstance(decl.name, decl, state, deque([start]), seen={start})


class _Disengage(Exception):
    pass


def _is_num(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_int(v: Any, line: int) -> Any:
    if isinstance(v, int) and not isinstance(v, bool) and not INT_MIN <= v <= INT_MAX:
        raise RuntimeTypeError(f"line {line}: integer overflow", line=line)
    return v


def _type(v: Any) -> str:
    if v is None:
        return "null"
    return {bool: "bool", int: "int", float: "float", str: "string", list: "list", dict: "map"}.get(type(v), type(v).__name__)


class Interpreter:
    def __init__(self, instance: WalkerInstance, session: Session,
                 call_action: Callable[[str, list[Any]], Any]) -> None:
        self.inst = instance
        self.session = session
        self.call_action = call_action
        self.locals: dict[str, Any] = {}

    # the only doors to node context

    def _here_context(self, node_id: int) -> dict[str, Any]:
        if node_id != self.inst.current:
            raise ScopeViolation(f"walker on node {self.inst.current} touched node {node_id}")
        return self.session.node(node_id).context

    def _read_here(self, name: str, line: int) -> Any:
        ctx = self._here_context(self.inst.current)
        if name not in ctx:
            node = self.session.node(self.inst.current)
            raise RuntimeTypeError(f"line {line}: node type {node.type_name!r} has no field {name!r}", line=line)
        return ctx[name]

    def _write_here(self, name: str, value: Any, line: int) -> None:
        ctx = self._here_context(self.inst.current)
        if name not in ctx:
            node = self.session.node(self.inst.current)
            raise RuntimeTypeError(f"line {line}: node type {node.type_name!r} has no field {name!r}", line=line)
        self.session.set_field(self.inst.current, name, value)

    def _check_access(self, node_id: int) -> None:
        node = self.session.node(node_id)
        if node.access_list is not None and self.inst.walker_type not in node.access_list:
            raise AccessDenied(self.inst.walker_type, node.type_name, node_id)

    # driver

    def run(self) -> list[Any]:
        inst = self.inst
        try:
            if inst.queue:
                self._check_access(inst.queue[0])
            while inst.queue:
                inst.current = inst.queue.popleft()
                inst.visited.add(inst.current)
                self.session.node(inst.current)
                self.locals = {}
                try:
                    self.block(inst.decl.body)
                except _Disengage:
                    inst.queue.clear()
                    inst.status = "disengaged"
                    break
        except JacetteError:
            inst.status = "failed"
            raise
        if inst.status == "running":
            inst.status = "finished"
        return inst.report

    # statements

    def block(self, stmts: Iterable[A.Stmt]) -> None:
        for s in stmts:
            self.stmt(s)

    def stmt(self, s: A.Stmt) -> None:
        if isinstance(s, A.Assign):
            value = self.eval(s.value)
            t = s.target
            if isinstance(t, A.HereField):
                self._write_here(t.name, value, s.line)
            elif isinstance(t, A.VarRef):
                self.locals[t.name] = value
            else:
                self.inst.state[t.name] = value
        elif isinstance(s, A.Take):
            self._take(s)
        elif isinstance(s, A.Spawn):
            ctx = {name: self.eval(v) for name, v in s.inits}
            new_id = self.session.create_node(s.node_type, ctx)
            here = self.inst.current
            src, dst = (here, new_id) if s.direction == "++>" else (new_id, here)
            self.session.create_edge(s.edge_type, src, dst)
        elif isinstance(s, A.If):
            self.block(s.then if self._truthy(self.eval(s.cond)) else s.orelse)
        elif isinstance(s, A.ForIn):
            seq = self.eval(s.iterable)
            if isinstance(seq, dict):
                seq = list(seq)
            elif not isinstance(seq, list):
                raise RuntimeTypeError(f"line {s.line}: cannot iterate over {_type(seq)}", line=s.line)
            saved = self.locals.get(s.var, _MISSING)
            for item in list(seq):
                self.locals[s.var] = item
                self.block(s.body)
            if saved is _MISSING:
                self.locals.pop(s.var, None)
            else:
                self.locals[s.var] = saved
        elif isinstance(s, A.Report):
            self.inst.report.append(self.eval(s.value))
        elif isinstance(s, A.Disengage):
            raise _Disengage()
        elif isinstance(s, A.ExprStmt):
            self.eval(s.expr)
        else:
            raise TypeError(f"unknown statement {s!r}")

    def _take(self, s: A.Take) -> None:
        inst = self.inst
        for _edge, node_id in self.session.neighbors(inst.current, TAKE_DIRECTIONS[s.direction], s.edge_type):
            if node_id in inst.seen:
                continue
            node = self.session.node(node_id)
            if s.node_type is not None and node.type_name != s.node_type:
                continue
            self._check_access(node_id)
            inst.queue.append(node_id)
            inst.seen.add(node_id)

    # expressions

    @staticmethod
    def _truthy(v: Any) -> bool:
        return bool(v)

    def eval(self, e: A.Expr) -> Any:
        if isinstance(e, A.Literal):
            return e.value
        if isinstance(e, A.WalkerField):
            return self.inst.state[e.name]
        if isinstance(e, A.VarRef):
            return self.locals[e.name]
        if isinstance(e, A.HereField):
            return self._read_here(e.name, e.line)
        if isinstance(e, A.ListLit):
            return [self.eval(i) for i in e.items]
        if isinstance(e, A.Index):
            return self._index(self.eval(e.target), self.eval(e.index), e.line)
        if isinstance(e, A.ActionCall):
            node = self.session.node(self.inst.current)
            allowed = self.session.schema.node_actions.get(node.type_name)
            if allowed and e.name not in allowed:
                # a node's can-list whitelists what may run while here is that node
                raise RuntimeTypeError(
                    f"line {e.line}: action {e.name!r} is not allowed on node type {node.type_name!r}", line=e.line)
            return self.call_action(e.name, [self.eval(a) for a in e.args])
        if isinstance(e, A.Unary):
            v = self.eval(e.operand)
            if e.op == "not":
                return not self._truthy(v)
            if not _is_num(v):
                raise RuntimeTypeError(f"line {e.line}: cannot negate {_type(v)}", line=e.line)
            return _check_int(-v, e.line)
        if isinstance(e, A.BinOp):
            if e.op == "and":
                left = self.eval(e.left)
                return self._truthy(left) and self._truthy(self.eval(e.right))
            if e.op == "or":
                left = self.eval(e.left)
                return self._truthy(left) or self._truthy(self.eval(e.right))
            return self._binop(e.op, self.eval(e.left), self.eval(e.right), e.line)
        raise TypeError(f"unknown expression {e!r}")

    def _index(self, target: Any, index: Any, line: int) -> Any:
        if isinstance(target, (list, str)):
            if not isinstance(index, int) or isinstance(index, bool):
                raise RuntimeTypeError(f"line {line}: {_type(target)} index must be int", line=line)
            if not 0 <= index < len(target):
                raise RuntimeTypeError(f"line {line}: index {index} out of range", line=line)
            return target[index]
        if isinstance(target, dict):
            if not isinstance(index, str) or index not in target:
                raise RuntimeTypeError(f"line {line}: no key {index!r} in map", line=line)
            return target[index]
        raise RuntimeTypeError(f"line {line}: cannot index {_type(target)}", line=line)

    def _binop(self, op: str, a: Any, b: Any, line: int) -> Any:
        if op == "==":
            return strict_equal(a, b)
        if op == "!=":
            return not strict_equal(a, b)
        if op in ("<", ">"):
            if (_is_num(a) and _is_num(b)) or (isinstance(a, str) and isinstance(b, str)):
                return a < b if op == "<" else a > b
        elif op == "+":
            if _is_num(a) and _is_num(b):
                return _check_int(a + b, line)
            if (isinstance(a, str) and isinstance(b, str)) or (isinstance(a, list) and isinstance(b, list)):
                return a + b
        elif op in ("-", "*"):
            if _is_num(a) and _is_num(b):
                return _check_int(a - b if op == "-" else a * b, line)
        elif op == "/":
            if _is_num(a) and _is_num(b):
                if b == 0:
                    raise RuntimeTypeError(f"line {line}: division by zero", line=line)
                return a / b
        raise RuntimeTypeError(f"line {line}: unsupported operands for {op}: {_type(a)} and {_type(b)}", line=line)


_MISSING = object()
