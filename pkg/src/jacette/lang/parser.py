"""Recursive-descent parser and post-parse resolution for mini-Jac."""

from __future__ import annotations

from typing import Iterable, Optional

from ..errors import JacSyntaxError, ResolutionError
from ..values import INT_MAX
from . import ast as A
from .lexer import Token, tokenize

TAKE_ARROWS = ("-->", "<--", "<-->")
SPAWN_ARROWS = ("++>", "<++")
COMPARISONS = ("==", "!=", "<", ">")


class Parser:
    def __init__(self, source: str, trace: Optional[set[str]] = None) -> None:
        self.tokens = tokenize(source)
        self.pos = 0
        self.trace = trace
        self._expected: set[str] = set()
        self._walker_fields: tuple[str, ...] = ()
        self._loop_vars: list[str] = []

    # token plumbing

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def _peek(self, offset: int) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def _advance(self) -> Token:
        tok = self.tok
        self.pos += 1
        self._expected = set()
        return tok

    def _at(self, value: str) -> bool:
        """True if the current token is the keyword or punctuation ``value``."""
        self._expected.add(value)
        return self.tok.kind in ("KW", "OP") and self.tok.value == value

    def _accept(self, value: str) -> bool:
        if self._at(value):
            self._advance()
            return True
        return False

    def _expect(self, value: str) -> Token:
        if not self._at(value):
            self._fail()
        return self._advance()

    def _ident(self) -> Token:
        self._expected.add("identifier")
        if self.tok.kind != "IDENT":
            self._fail()
        return self._advance()

    def _fail(self) -> None:
        tok = self.tok
        line, col = tok.line, tok.col
        prev = self.tokens[self.pos - 1] if self.pos else None
        if prev is not None and tok.line > prev.line and self._expected & {";", "{"}:
            # the missing terminator belongs at the end of the previous line
            line, col = prev.line, prev.col + len(prev.text)
        suspect = self._unclosed_block()
        if suspect is not None and (suspect.line < line or (suspect is tok and "}" in self._expected)):
            at = self.tokens.index(suspect)
            before = self.tokens[at - 1] if at else None
            if before is not None and suspect.line - before.line > 1:
                # blank lines in between: the brace belongs after the last token
                raise JacSyntaxError(before.line, before.col + len(before.text), ("}",), suspect.text)
            raise JacSyntaxError(suspect.line, suspect.col, ("}",), suspect.text)
        raise JacSyntaxError(line, col, tuple(sorted(self._expected)), tok.text)

    def _unclosed_block(self) -> Optional[Token]:
        """First line, among those already read, that is indented no deeper
        than a still-open '{' line: the likely spot of a missing '}'."""
        indent: dict[int, int] = {}
        open_at: list[int] = []
        last_line = 0
        for tok in self.tokens[: self.pos + 1]:
            if tok.kind == "EOF":
                break
            if tok.line != last_line:
                last_line = tok.line
                indent[tok.line] = tok.col
                if open_at and tok.value != "}" and tok.col <= open_at[-1]:
                    return tok
                if open_at and tok.value == "}" and tok.col < open_at[-1]:
                    return tok  # closes an outer block: an inner '}' is gone
            if tok.kind == "OP" and tok.value == "{":
                open_at.append(indent[tok.line])
            elif tok.kind == "OP" and tok.value == "}" and open_at:
                open_at.pop()
        return None

    def _mark(self, production: str) -> None:
        if self.trace is not None:
            self.trace.add(production)

    # declarations

    def parse_program(self) -> A.Program:
        self._mark("program")
        nodes, edges, walkers = [], [], []
        while True:
            if self._at("node"):
                nodes.append(self._node_decl())
            elif self._at("edge"):
                edges.append(self._edge_decl())
            elif self._at("walker"):
                walkers.append(self._walker_decl())
            else:
                self._expected.add("end of input")
                if self.tok.kind != "EOF":
                    self._fail()
                break
        return A.Program(tuple(nodes), tuple(edges), tuple(walkers))

    def _node_decl(self) -> A.NodeDecl:
        self._mark("node_decl")
        line = self._advance().line
        name = self._ident().value
        access = None
        if self._at("access"):
            access = self._access_clause()
        self._expect("{")
        has: list[str] = []
        can: list[str] = []
        while not self._accept("}"):
            if self._at("has"):
                has.extend(self._has_stmt())
            elif self._at("can"):
                can.append(self._can_stmt())
            else:
                self._fail()
        return A.NodeDecl(name, tuple(has), access, tuple(can), line=line)

    def _access_clause(self) -> tuple[str, ...]:
        self._mark("access_clause")
        self._advance()
        self._expect("(")
        names = [self._ident().value]
        while self._accept(","):
            names.append(self._ident().value)
        self._expect(")")
        return tuple(names)

    def _edge_decl(self) -> A.EdgeDecl:
        self._mark("edge_decl")
        line = self._advance().line
        name = self._ident().value
        self._expect("{")
        has: list[str] = []
        while not self._accept("}"):
            if self._at("has"):
                has.extend(self._has_stmt())
            else:
                self._fail()
        return A.EdgeDecl(name, tuple(has), line=line)

    def _walker_decl(self) -> A.WalkerDecl:
        self._mark("walker_decl")
        line = self._advance().line
        name = self._ident().value
        self._expect("{")
        has: list[str] = []
        can: list[str] = []
        while True:
            if self._at("has"):
                has.extend(self._has_stmt())
            elif self._at("can"):
                can.append(self._can_stmt())
            else:
                break
        self._walker_fields = tuple(has)
        body = self._block_body()
        return A.WalkerDecl(name, tuple(has), tuple(can), body, line=line)

    def _has_stmt(self) -> list[str]:
        self._mark("has_stmt")
        self._advance()
        names = [self._ident().value]
        while self._accept(","):
            names.append(self._ident().value)
        self._expect(";")
        return names

    def _can_stmt(self) -> str:
        self._mark("can_stmt")
        self._advance()
        name = self._ident().value
        self._expect(";")
        return name

    # statements

    def _block_body(self) -> tuple[A.Stmt, ...]:
        """Statements up to and including the closing brace."""
        stmts = []
        while not self._accept("}"):
            stmts.append(self._stmt())
        return tuple(stmts)

    def _block(self) -> tuple[A.Stmt, ...]:
        self._expect("{")
        return self._block_body()

    def _stmt(self) -> A.Stmt:
        self._mark("stmt")
        tok = self.tok
        if self._at("take"):
            return self._take()
        if self._at("spawn"):
            return self._spawn()
        if self._at("if"):
            return self._if()
        if self._at("for"):
            return self._forin()
        if self._at("report"):
            self._mark("report")
            self._advance()
            value = self._expr()
            self._expect(";")
            return A.Report(value, line=tok.line)
        if self._at("disengage"):
            self._mark("disengage")
            self._advance()
            self._expect(";")
            return A.Disengage(line=tok.line)
        nxt = self._peek(1)
        if tok.kind == "IDENT" and nxt.kind == "OP" and nxt.value == "=":
            return self._assign()
        if (tok.kind == "KW" and tok.value == "here" and self._peek(1).value == "."
                and self._peek(2).kind == "IDENT" and self._peek(3).kind == "OP"
                and self._peek(3).value == "="):
            return self._assign()
        self._mark("expr_stmt")
        expr = self._expr()
        self._expect(";")
        return A.ExprStmt(expr, line=tok.line)

    def _assign(self) -> A.Assign:
        self._mark("assign")
        self._mark("lvalue")
        tok = self.tok
        if self._accept("here"):
            self._expect(".")
            target: A.Expr = A.HereField(self._ident().value, line=tok.line)
        else:
            target = self._name_ref(self._ident())
        self._expect("=")
        value = self._expr()
        self._expect(";")
        return A.Assign(target, value, line=tok.line)

    def _take(self) -> A.Take:
        self._mark("take")
        line = self._advance().line
        direction = None
        for arrow in TAKE_ARROWS:
            if self._accept(arrow):
                direction = arrow
                break
        if direction is None:
            self._fail()
        edge_type = node_type = None
        if self._accept(":"):
            edge_type = self._ident().value
        if self._accept("("):
            node_type = self._ident().value
            self._expect(")")
        self._expect(";")
        return A.Take(direction, edge_type, node_type, line=line)

    def _spawn(self) -> A.Spawn:
        self._mark("spawn")
        line = self._advance().line
        self._expect("here")
        direction = None
        for arrow in SPAWN_ARROWS:
            if self._accept(arrow):
                direction = arrow
                break
        if direction is None:
            self._fail()
        self._expect(":")
        edge_type = self._ident().value
        node_type = self._ident().value
        self._expect("{")
        inits = []
        while not self._accept("}"):
            name = self._ident().value
            self._expect("=")
            inits.append((name, self._expr()))
            self._expect(";")
        self._expect(";")
        return A.Spawn(direction, edge_type, node_type, tuple(inits), line=line)

    def _if(self) -> A.If:
        self._mark("if")
        line = self._advance().line
        cond = self._expr()
        then = self._block()
        orelse: tuple[A.Stmt, ...] = ()
        if self._accept("else"):
            orelse = self._block()
        return A.If(cond, then, orelse, line=line)

    def _forin(self) -> A.ForIn:
        self._mark("forin")
        line = self._advance().line
        var = self._ident().value
        self._expect("in")
        iterable = self._expr()
        self._loop_vars.append(var)
        try:
            body = self._block()
        finally:
            self._loop_vars.pop()
        return A.ForIn(var, iterable, body, line=line)

    # expressions

    def _name_ref(self, tok: Token) -> A.Expr:
        name = tok.value
        if name in self._loop_vars:
            return A.VarRef(name, line=tok.line)
        if name in self._walker_fields:
            return A.WalkerField(name, line=tok.line)
        return A.VarRef(name, line=tok.line)  # unbound; resolution reports it

    def _expr(self) -> A.Expr:
        left = self._and()
        while self._at("or"):
            line = self._advance().line
            left = A.BinOp("or", left, self._and(), line=line)
        return left

    def _and(self) -> A.Expr:
        left = self._not()
        while self._at("and"):
            line = self._advance().line
            left = A.BinOp("and", left, self._not(), line=line)
        return left

    def _not(self) -> A.Expr:
        if self._at("not"):
            line = self._advance().line
            return A.Unary("not", self._not(), line=line)
        return self._comparison()

    def _binary(self, ops: Iterable[str], operand) -> A.Expr:
        left = operand()
        while True:
            for op in ops:
                if self._at(op):
                    line = self._advance().line
                    left = A.BinOp(op, left, operand(), line=line)
                    break
            else:
                return left

    def _comparison(self) -> A.Expr:
        return self._binary(COMPARISONS, self._additive)

    def _additive(self) -> A.Expr:
        return self._binary(("+", "-"), self._multiplicative)

    def _multiplicative(self) -> A.Expr:
        return self._binary(("*", "/"), self._unary)

    def _unary(self) -> A.Expr:
        if self._at("-"):
            line = self._advance().line
            return A.Unary("-", self._unary(), line=line)
        return self._postfix()

    def _postfix(self) -> A.Expr:
        expr = self._primary()
        while self._at("["):
            line = self._advance().line
            index = self._expr()
            self._expect("]")
            expr = A.Index(expr, index, line=line)
        return expr

    def _primary(self) -> A.Expr:
        tok = self.tok
        if tok.kind in ("INT", "FLOAT", "STRING"):
            if tok.kind == "INT" and tok.value > INT_MAX:
                raise JacSyntaxError(tok.line, tok.col, ("64-bit integer",), tok.text)
            self._advance()
            return A.Literal(tok.value, line=tok.line)
        for word, value in (("null", None), ("true", True), ("false", False)):
            if self._accept(word):
                return A.Literal(value, line=tok.line)
        if self._accept("here"):
            self._expect(".")
            return A.HereField(self._ident().value, line=tok.line)
        if self._accept("["):
            items = self._args("]")
            return A.ListLit(items, line=tok.line)
        if self._accept("("):
            inner = self._expr()
            self._expect(")")
            return inner
        self._expected.add("expression")
        if tok.kind == "IDENT":
            self._advance()
            if self._accept("("):
                return A.ActionCall(tok.value, self._args(")"), line=tok.line)
            return self._name_ref(tok)
        self._fail()
        raise AssertionError("unreachable")

    def _args(self, closer: str) -> tuple[A.Expr, ...]:
        items = []
        if not self._accept(closer):
            items.append(self._expr())
            while self._accept(","):
                items.append(self._expr())
            self._expect(closer)
        return tuple(items)


# resolution

def _unique(names: Iterable[str], what: str, line: int) -> None:
    seen = set()
    for n in names:
        if n in seen:
            raise ResolutionError(n, line, f"line {line}: duplicate {what} {n!r}")
        seen.add(n)


def resolve(program: A.Program, base: Optional[A.Program] = None) -> A.Program:
    """Check every reference in ``program``; declarations from ``base``
    (the live program, when injecting) are visible too."""
    for decls, kind in ((program.node_decls, "node type"), (program.edge_decls, "edge type"),
                        (program.walker_decls, "walker")):
        _unique([d.name for d in decls], kind, decls[-1].line if decls else 0)
    nodes = {d.name: d for d in program.node_decls}
    edges = {d.name: d for d in program.edge_decls}
    if base is not None:
        for d in base.node_decls:
            nodes.setdefault(d.name, d)
        for d in base.edge_decls:
            edges.setdefault(d.name, d)
    for d in program.node_decls:
        _unique(d.has_fields, "field", d.line)
        _unique(d.can_actions, "action", d.line)
        if d.access_walkers is not None:
            _unique(d.access_walkers, "walker in access list", d.line)
    for d in program.edge_decls:
        _unique(d.has_fields, "field", d.line)
    here_fields = {f for d in nodes.values() for f in d.has_fields}
    for w in program.walker_decls:
        _unique(w.has_fields, "field", w.line)
        _unique(w.can_actions, "action", w.line)
        _Resolver(w, nodes, edges, here_fields).block(w.body, ())
    return program


class _Resolver:
    def __init__(self, walker: A.WalkerDecl, nodes: dict, edges: dict, here_fields: set[str]) -> None:
        self.walker = walker
        self.nodes = nodes
        self.edges = edges
        self.here_fields = here_fields

    def block(self, stmts: tuple[A.Stmt, ...], scope: tuple[str, ...]) -> None:
        for s in stmts:
            self.stmt(s, scope)

    def _type(self, name: Optional[str], table: dict, line: int, what: str) -> None:
        if name is not None and name not in table:
            raise ResolutionError(name, line, f"line {line}: unknown {what} {name!r}")

    def stmt(self, s: A.Stmt, scope: tuple[str, ...]) -> None:
        if isinstance(s, A.Assign):
            self.expr(s.target, scope)
            self.expr(s.value, scope)
        elif isinstance(s, A.Take):
            self._type(s.edge_type, self.edges, s.line, "edge type")
            self._type(s.node_type, self.nodes, s.line, "node type")
        elif isinstance(s, A.Spawn):
            self._type(s.edge_type, self.edges, s.line, "edge type")
            self._type(s.node_type, self.nodes, s.line, "node type")
            fields = self.nodes[s.node_type].has_fields
            _unique([n for n, _ in s.inits], "initializer", s.line)
            for name, value in s.inits:
                if name not in fields:
                    raise ResolutionError(name, s.line, f"line {s.line}: node type {s.node_type!r} has no field {name!r}")
                self.expr(value, scope)
        elif isinstance(s, A.If):
            self.expr(s.cond, scope)
            self.block(s.then, scope)
            self.block(s.orelse, scope)
        elif isinstance(s, A.ForIn):
            self.expr(s.iterable, scope)
            self.block(s.body, scope + (s.var,))
        elif isinstance(s, A.Report):
            self.expr(s.value, scope)
        elif isinstance(s, A.ExprStmt):
            self.expr(s.expr, scope)

    def expr(self, e: A.Expr, scope: tuple[str, ...]) -> None:
        if isinstance(e, A.VarRef):
            if e.name not in scope:
                raise ResolutionError(e.name, e.line)
        elif isinstance(e, A.WalkerField):
            if e.name not in self.walker.has_fields:
                raise ResolutionError(e.name, e.line)
        elif isinstance(e, A.HereField):
            if e.name not in self.here_fields:
                raise ResolutionError(e.name, e.line, f"line {e.line}: no node type has field {e.name!r}")
        elif isinstance(e, A.ActionCall):
            if e.name not in self.walker.can_actions:
                raise ResolutionError(
                    e.name, e.line,
                    f"line {e.line}: action {e.name!r} is not declared with 'can' in walker {self.walker.name!r}")
            for a in e.args:
                self.expr(a, scope)
        elif isinstance(e, A.BinOp):
            self.expr(e.left, scope)
            self.expr(e.right, scope)
        elif isinstance(e, A.Unary):
            self.expr(e.operand, scope)
        elif isinstance(e, A.ListLit):
            for item in e.items:
                self.expr(item, scope)
        elif isinstance(e, A.Index):
            self.expr(e.target, scope)
            self.expr(e.index, scope)


def parse(source: str, *, base: Optional[A.Program] = None, check: bool = True,
          trace: Optional[set[str]] = None) -> A.Program:
    """Parse mini-Jac source into a Program, resolving references unless
    ``check`` is false."""
    program = Parser(source, trace).parse_program()
    return resolve(program, base) if check else program
