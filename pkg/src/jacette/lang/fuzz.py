"""Random generator of well-formed, resolvable mini-Jac programs.

Used by the round-trip property tests and the walker scope fuzzer.
Numeric literals are non-negative because the grammar spells negative
numbers as unary minus.
"""

from __future__ import annotations

import random
import string
from typing import Optional

from . import ast as A
from .lexer import KEYWORDS

_ALPHABET = string.ascii_letters + string.digits + " _.,!?-" + '"\\\n'


class ProgramGenerator:
    def __init__(self, rng: random.Random, max_depth: int = 3) -> None:
        self.rng = rng
        self.max_depth = max_depth
        self._used: set[str] = set()

    def ident(self, prefix: str = "") -> str:
        while True:
            length = self.rng.randint(1, 6)
            first = self.rng.choice(string.ascii_letters + "_")
            rest = "".join(self.rng.choice(string.ascii_letters + string.digits + "_") for _ in range(length - 1))
            name = prefix + first + rest
            if name not in KEYWORDS and name not in self._used:
                self._used.add(name)
                return name

    def program(self) -> A.Program:
        rng = self.rng
        self._used = set()
        nodes = []
        for _ in range(rng.randint(1, 3)):
            has = tuple(self.ident() for _ in range(rng.randint(0, 3)))
            access = tuple(self.ident() for _ in range(rng.randint(1, 2))) if rng.random() < 0.3 else None
            can = tuple(self.ident() for _ in range(rng.randint(0, 2)))
            nodes.append(A.NodeDecl(self.ident(), has, access, can))
        edges = [A.EdgeDecl(self.ident(), tuple(self.ident() for _ in range(rng.randint(0, 2))))
                 for _ in range(rng.randint(1, 2))]
        self.nodes = nodes
        self.edges = edges
        self.here_fields = [f for n in nodes for f in n.has_fields]
        walkers = []
        for _ in range(rng.randint(1, 2)):
            self.w_fields = tuple(self.ident() for _ in range(rng.randint(0, 3)))
            self.w_actions = tuple(self.ident() for _ in range(rng.randint(0, 2)))
            body = self.block(0, ())
            walkers.append(A.WalkerDecl(self.ident(), self.w_fields, self.w_actions, body))
        return A.Program(tuple(nodes), tuple(edges), tuple(walkers))

    # statements

    def block(self, depth: int, scope: tuple[str, ...]) -> tuple[A.Stmt, ...]:
        n = self.rng.randint(0, 4 if depth == 0 else 2)
        return tuple(self.stmt(depth, scope) for _ in range(n))

    def stmt(self, depth: int, scope: tuple[str, ...]) -> A.Stmt:
        rng = self.rng
        kinds = ["assign", "take", "spawn", "report", "disengage", "expr"]
        if depth < self.max_depth:
            kinds += ["if", "for"]
        kind = rng.choice(kinds)
        if kind == "assign":
            targets: list[A.Expr] = [A.WalkerField(f) for f in self.w_fields]
            targets += [A.VarRef(v) for v in scope]
            targets += [A.HereField(f) for f in self.here_fields]
            if targets:
                return A.Assign(rng.choice(targets), self.expr(depth, scope))
            kind = "report"
        if kind == "take":
            return A.Take(rng.choice(("-->", "<--", "<-->")),
                          rng.choice(self.edges).name if rng.random() < 0.5 else None,
                          rng.choice(self.nodes).name if rng.random() < 0.5 else None)
        if kind == "spawn":
            node = rng.choice(self.nodes)
            fields = [f for f in node.has_fields if rng.random() < 0.6]
            inits = tuple((f, self.expr(depth + 1, scope)) for f in fields)
            return A.Spawn(rng.choice(("++>", "<++")), rng.choice(self.edges).name, node.name, inits)
        if kind == "report":
            return A.Report(self.expr(depth, scope))
        if kind == "disengage":
            return A.Disengage()
        if kind == "if":
            orelse = self.block(depth + 1, scope) if rng.random() < 0.5 else ()
            return A.If(self.expr(depth, scope), self.block(depth + 1, scope), orelse)
        if kind == "for":
            var = self.ident()
            return A.ForIn(var, self.expr(depth, scope), self.block(depth + 1, scope + (var,)))
        return A.ExprStmt(self.expr(depth, scope))

    # expressions

    def literal(self) -> A.Literal:
        rng = self.rng
        choice = rng.randint(0, 5)
        if choice == 0:
            return A.Literal(None)
        if choice == 1:
            return A.Literal(rng.random() < 0.5)
        if choice == 2:
            return A.Literal(rng.randint(0, 2**63 - 1) if rng.random() < 0.1 else rng.randint(0, 1000))
        if choice == 3:
            return A.Literal(rng.choice([0.0, 0.5, 1e-7, 3.25, 1e16, 2.5e300, rng.random() * 1000]))
        return A.Literal("".join(rng.choice(_ALPHABET) for _ in range(rng.randint(0, 8))))

    def expr(self, depth: int, scope: tuple[str, ...], budget: Optional[int] = None) -> A.Expr:
        rng = self.rng
        if budget is None:
            budget = rng.randint(1, 4)
        leaves: list[A.Expr] = [self.literal()]
        leaves += [A.WalkerField(f) for f in self.w_fields]
        leaves += [A.VarRef(v) for v in scope]
        leaves += [A.HereField(f) for f in self.here_fields]
        if budget <= 0:
            return rng.choice(leaves)
        kind = rng.randint(0, 6)
        sub = lambda: self.expr(depth, scope, budget - 1)  # noqa: E731
        if kind == 0:
            return rng.choice(leaves)
        if kind == 1:
            op = rng.choice(["+", "-", "*", "/", "==", "!=", "<", ">", "and", "or"])
            return A.BinOp(op, sub(), sub())
        if kind == 2:
            return A.Unary(rng.choice(["-", "not"]), sub())
        if kind == 3:
            return A.ListLit(tuple(sub() for _ in range(rng.randint(0, 3))))
        if kind == 4:
            return A.Index(sub(), sub())
        if kind == 5 and self.w_actions:
            return A.ActionCall(rng.choice(self.w_actions), tuple(sub() for _ in range(rng.randint(0, 2))))
        return A.BinOp(rng.choice(["+", "*"]), sub(), sub())


def random_program(seed: int, max_depth: int = 3) -> A.Program:
    return ProgramGenerator(random.Random(seed), max_depth).program()
