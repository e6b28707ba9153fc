"""Canonical pretty-printer: 4-space indents, one statement per line.

Parentheses are emitted only where precedence requires them, so printing
a re-parsed program reproduces the same bytes.
"""

from __future__ import annotations

from . import ast as A

INDENT = "    "

_PREC = {"or": 1, "and": 2, "==": 4, "!=": 4, "<": 4, ">": 4, "+": 5, "-": 5, "*": 6, "/": 6}
_NOT_PREC = 3
_NEG_PREC = 7
_POSTFIX_PREC = 8
_ATOM_PREC = 9


def _string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _literal(v) -> str:
    if v is None:
        return "null"
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, str):
        return _string(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _prec(e: A.Expr) -> int:
    if isinstance(e, A.BinOp):
        return _PREC[e.op]
    if isinstance(e, A.Unary):
        return _NOT_PREC if e.op == "not" else _NEG_PREC
    if isinstance(e, (A.Index, A.ActionCall)):
        return _POSTFIX_PREC
    if isinstance(e, A.Literal) and isinstance(e.value, (int, float)) and not isinstance(e.value, bool) and e.value < 0:
        return _NEG_PREC  # prints with a leading minus
    return _ATOM_PREC


def expr_text(e: A.Expr, min_prec: int = 0) -> str:
    text = _expr(e)
    return f"({text})" if _prec(e) < min_prec else text


def _expr(e: A.Expr) -> str:
    if isinstance(e, A.Literal):
        return _literal(e.value)
    if isinstance(e, (A.VarRef, A.WalkerField)):
        return e.name
    if isinstance(e, A.HereField):
        return f"here.{e.name}"
    if isinstance(e, A.ActionCall):
        return f"{e.name}({', '.join(expr_text(a) for a in e.args)})"
    if isinstance(e, A.ListLit):
        return f"[{', '.join(expr_text(a) for a in e.items)}]"
    if isinstance(e, A.Index):
        return f"{expr_text(e.target, _POSTFIX_PREC)}[{expr_text(e.index)}]"
    if isinstance(e, A.Unary):
        if e.op == "not":
            return f"not {expr_text(e.operand, _NOT_PREC)}"
        return f"-{expr_text(e.operand, _NEG_PREC)}"
    if isinstance(e, A.BinOp):
        p = _PREC[e.op]
        return f"{expr_text(e.left, p)} {e.op} {expr_text(e.right, p + 1)}"
    raise TypeError(f"not an expression: {e!r}")


def _stmts(stmts, depth: int, out: list[str]) -> None:
    for s in stmts:
        _stmt(s, depth, out)


def _stmt(s: A.Stmt, depth: int, out: list[str]) -> None:
    pad = INDENT * depth
    if isinstance(s, A.Assign):
        out.append(f"{pad}{_expr(s.target)} = {expr_text(s.value)};")
    elif isinstance(s, A.Take):
        text = f"take {s.direction}"
        if s.edge_type is not None:
            text += f":{s.edge_type}"
        if s.node_type is not None:
            text += f"({s.node_type})"
        out.append(f"{pad}{text};")
    elif isinstance(s, A.Spawn):
        inits = " ".join(f"{n} = {expr_text(v)};" for n, v in s.inits)
        body = f"{{ {inits} }}" if inits else "{}"
        out.append(f"{pad}spawn here {s.direction}:{s.edge_type} {s.node_type} {body};")
    elif isinstance(s, A.If):
        out.append(f"{pad}if {expr_text(s.cond)} {{")
        _stmts(s.then, depth + 1, out)
        if s.orelse:
            out.append(f"{pad}}} else {{")
            _stmts(s.orelse, depth + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, A.ForIn):
        out.append(f"{pad}for {s.var} in {expr_text(s.iterable)} {{")
        _stmts(s.body, depth + 1, out)
        out.append(f"{pad}}}")
    elif isinstance(s, A.Report):
        out.append(f"{pad}report {expr_text(s.value)};")
    elif isinstance(s, A.Disengage):
        out.append(f"{pad}disengage;")
    elif isinstance(s, A.ExprStmt):
        out.append(f"{pad}{expr_text(s.expr)};")
    else:
        raise TypeError(f"not a statement: {s!r}")


def pretty_print(program: A.Program) -> str:
    out: list[str] = []
    for d in program.node_decls:
        access = f" access({', '.join(d.access_walkers)})" if d.access_walkers is not None else ""
        out.append(f"node {d.name}{access} {{")
        if d.has_fields:
            out.append(f"{INDENT}has {', '.join(d.has_fields)};")
        out.extend(f"{INDENT}can {c};" for c in d.can_actions)
        out.append("}")
    for d in program.edge_decls:
        out.append(f"edge {d.name} {{")
        if d.has_fields:
            out.append(f"{INDENT}has {', '.join(d.has_fields)};")
        out.append("}")
    for w in program.walker_decls:
        out.append(f"walker {w.name} {{")
        if w.has_fields:
            out.append(f"{INDENT}has {', '.join(w.has_fields)};")
        out.extend(f"{INDENT}can {c};" for c in w.can_actions)
        _stmts(w.body, 1, out)
        out.append("}")
    return "\n".join(out) + "\n" if out else ""
