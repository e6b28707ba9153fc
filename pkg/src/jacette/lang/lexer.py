from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from ..errors import JacSyntaxError

KEYWORDS = frozenset({
    "node", "edge", "walker", "access", "has", "can", "take", "spawn", "here",
    "if", "else", "for", "in", "report", "disengage", "and", "or", "not",
    "null", "true", "false",
})

# Longest first so "<-->" wins over "<--" and "<".
PUNCT = ("<-->", "-->", "<--", "++>", "<++", "==", "!=",
         "{", "}", "(", ")", "[", "]", ";", ",", ":", ".", "=", "<", ">", "+", "-", "*", "/")

_ESCAPES = {"n": "\n", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str   # IDENT, KW, INT, FLOAT, STRING, OP, EOF
    value: Any
    line: int
    col: int

    @property
    def text(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        if self.kind == "STRING":
            return '"' + self.value + '"'
        return str(self.value)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(source)

    def fail(msg: str) -> JacSyntaxError:
        return JacSyntaxError(line, col, (msg,), source[i] if i < n else "end of input")

    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_col = col
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            word = source[i:j]
            tokens.append(Token("KW" if word in KEYWORDS else "IDENT", word, line, start_col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j + 1 < n and source[j] == "." and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    is_float = True
                    while k < n and source[k].isdigit():
                        k += 1
                    j = k
            text = source[i:j]
            tokens.append(Token("FLOAT", float(text), line, start_col) if is_float
                          else Token("INT", int(text), line, start_col))
            col += j - i
            i = j
            continue
        if c == '"':
            j = i + 1
            chars = []
            while True:
                if j >= n or source[j] == "\n":
                    raise fail('closing "')
                ch = source[j]
                if ch == '"':
                    break
                if ch == "\\":
                    esc = source[j + 1] if j + 1 < n else ""
                    if esc not in _ESCAPES:
                        col += j - i
                        i = j
                        raise fail("escape \\n, \\\" or \\\\")
                    chars.append(_ESCAPES[esc])
                    j += 2
                    continue
                chars.append(ch)
                j += 1
            tokens.append(Token("STRING", "".join(chars), line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        for p in PUNCT:
            if source.startswith(p, i):
                tokens.append(Token("OP", p, line, start_col))
                i += len(p)
                col += len(p)
                break
        else:
            raise fail("a token")
    tokens.append(Token("EOF", None, line, col))
    return tokens
