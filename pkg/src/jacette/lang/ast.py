"""Immutable AST for the mini-Jac dialect.

Source positions are carried in ``line`` but excluded from equality, so
two ASTs compare equal when they have the same structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Union


def _pos() -> Any:
    return field(default=0, compare=False, repr=False)


# expressions

@dataclass(frozen=True, eq=False)
class Literal:
    value: Any  # None, bool, int, float or str
    line: int = _pos()

    def _key(self) -> tuple:
        return (type(self.value), self.value)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Literal) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())


@dataclass(frozen=True)
class VarRef:
    """A ``for`` loop variable."""
    name: str
    line: int = _pos()


@dataclass(frozen=True)
class WalkerField:
    name: str
    line: int = _pos()


@dataclass(frozen=True)
class HereField:
    name: str
    line: int = _pos()


@dataclass(frozen=True)
class ActionCall:
    name: str
    args: tuple["Expr", ...]
    line: int = _pos()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    line: int = _pos()


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: "Expr"
    line: int = _pos()


@dataclass(frozen=True)
class ListLit:
    items: tuple["Expr", ...]
    line: int = _pos()


@dataclass(frozen=True)
class Index:
    target: "Expr"
    index: "Expr"
    line: int = _pos()


Expr = Union[Literal, VarRef, WalkerField, HereField, ActionCall, BinOp, Unary, ListLit, Index]


# statements

@dataclass(frozen=True)
class Assign:
    target: Union[VarRef, WalkerField, HereField]
    value: Expr
    line: int = _pos()


@dataclass(frozen=True)
class Take:
    direction: str  # "-->", "<--" or "<-->"
    edge_type: Optional[str] = None
    node_type: Optional[str] = None
    line: int = _pos()


@dataclass(frozen=True)
class Spawn:
    direction: str  # "++>" or "<++"
    edge_type: str
    node_type: str
    inits: tuple[tuple[str, Expr], ...] = ()
    line: int = _pos()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Stmt", ...]
    orelse: tuple["Stmt", ...] = ()
    line: int = _pos()


@dataclass(frozen=True)
class ForIn:
    var: str
    iterable: Expr
    body: tuple["Stmt", ...]
    line: int = _pos()


@dataclass(frozen=True)
class Report:
    value: Expr
    line: int = _pos()


@dataclass(frozen=True)
class Disengage:
    line: int = _pos()


@dataclass(frozen=True)
class ExprStmt:
    expr: Expr
    line: int = _pos()


Stmt = Union[Assign, Take, Spawn, If, ForIn, Report, Disengage, ExprStmt]


# declarations

@dataclass(frozen=True)
class NodeDecl:
    name: str
    has_fields: tuple[str, ...] = ()
    access_walkers: Optional[tuple[str, ...]] = None
    can_actions: tuple[str, ...] = ()
    line: int = _pos()


@dataclass(frozen=True)
class EdgeDecl:
    name: str
    has_fields: tuple[str, ...] = ()
    line: int = _pos()


@dataclass(frozen=True)
class WalkerDecl:
    name: str
    has_fields: tuple[str, ...] = ()
    can_actions: tuple[str, ...] = ()
    body: tuple[Stmt, ...] = ()
    line: int = _pos()


@dataclass(frozen=True)
class Program:
    node_decls: tuple[NodeDecl, ...] = ()
    edge_decls: tuple[EdgeDecl, ...] = ()
    walker_decls: tuple[WalkerDecl, ...] = ()

    def node(self, name: str) -> Optional[NodeDecl]:
        return next((d for d in self.node_decls if d.name == name), None)

    def edge(self, name: str) -> Optional[EdgeDecl]:
        return next((d for d in self.edge_decls if d.name == name), None)

    def walker(self, name: str) -> Optional[WalkerDecl]:
        return next((d for d in self.walker_decls if d.name == name), None)
