"""Tokenizer shared by the `.hwmi` and `.halpl` readers."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction


class ParseError(Exception):
    """Syntax or semantic error in a source file, with a 1-based position."""

    def __init__(self, message, line=0, col=0):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, IDENT, OP, EOF
    text: str
    line: int
    col: int

    @property
    def value(self) -> Fraction:
        return Fraction(self.text)


_OPERATORS = [
    "<->", "\\+", "->", "<=", ">=", "!=", ":=", "::", ":-",
    "&", "|", "!", "<", ">", "=", "(", ")", ",", ";", ".", "+", "-",
    "*", "/", "^", "~", "[", "]", ":", "{", "}", "¬", "←", "≤", "≥", "≠",
]
_UNICODE = {"¬": "\\+", "←": ":-", "≤": "<=", "≥": ">=", "≠": "!="}

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)"
    r"|(?P<nl>\n)"
    r"|(?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>" + "|".join(re.escape(o) for o in _OPERATORS) + ")"
)


def tokenize(text: str, comment: str = "#") -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    n = len(text)
    while pos < n:
        if text[pos] == comment:
            end = text.find("\n", pos)
            pos = n if end < 0 else end
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "num":
            tokens.append(Token("NUM", m.group(), line, col))
        elif kind == "ident":
            tokens.append(Token("IDENT", m.group(), line, col))
        elif kind == "op":
            op = m.group()
            tokens.append(Token("OP", _UNICODE.get(op, op), line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with backtracking support."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def peek(self) -> Token:
        return self.tokens[self.pos]

    def lookahead(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def at(self, text: str) -> bool:
        tok = self.peek
        return tok.kind in ("OP", "IDENT") and tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}, found {self.peek.text or 'end of input'!r}")
        return self.next()

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.peek.kind != kind:
            self.error(f"expected {what}, found {self.peek.text or 'end of input'!r}")
        return self.next()

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.peek
        raise ParseError(message, tok.line, tok.col)
