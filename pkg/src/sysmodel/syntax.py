"""Tokenizer and recursive-descent helpers shared by the diagram parsers."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import DslSyntaxError
from .expr import NULL, Binary, Expr, Lit, Ref, Unary, Var

KEYWORDS = frozenset("""
    class extends attr method invariant assoc
    statemachine states initial trans on if emit to
    sequence objects link creatable by state
    and or not div true false null
""".split())

IDENT_RE = r"[A-Za-z_][A-Za-z0-9_]*"

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<int>[0-9]+)
  | (?P<ref>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|:=|==|!=|<=|>=|[{}(),:;<>+\-*/=.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, order=True)
class Span:
    """1-based source range; ``end_col`` is exclusive."""

    line: int
    col: int
    end_line: int
    end_col: int

    def cover(self, other: "Span") -> "Span":
        return Span(self.line, self.col, other.end_line, other.end_col)

    def __str__(self):
        return f"{self.line}:{self.col}"


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, int, string, ref, op, eof
    text: str
    span: Span


def tokenize(text: str, doc=None) -> list[Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {text[pos]!r}", line, col, doc=doc)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "nl":
            line, col = line + 1, 1
        else:
            if kind not in ("ws", "comment"):
                if kind == "ident" and chunk in KEYWORDS:
                    kind = "keyword"
                end = Span(line, col, line, col + len(chunk))
                tokens.append(Token(kind, chunk, end))
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, col, line, col)))
    return tokens


def describe(tok: Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


class BaseParser:
    """Token cursor plus the expression and literal sub-grammars."""

    def __init__(self, text: str, doc=None):
        self.doc = doc
        self.tokens = tokenize(text, doc)
        self.i = 0

    # -- cursor
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    @property
    def last_span(self) -> Span:
        return self.tokens[max(self.i - 1, 0)].span

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def at(self, *texts) -> bool:
        t = self.tok
        return t.kind in ("op", "keyword") and t.text in texts

    def at_kind(self, kind) -> bool:
        return self.tok.kind == kind

    def error(self, expected, message=None):
        t = self.tok
        raise DslSyntaxError(message or f"unexpected {describe(t)}",
                             t.span.line, t.span.col, expected, doc=self.doc)

    def accept(self, text) -> Token | None:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text) -> Token:
        if not self.at(text):
            self.error({repr(text)})
        return self.advance()

    def ident(self, what="identifier") -> Token:
        if self.tok.kind != "ident":
            self.error({what})
        return self.advance()

    def expect_eof(self):
        if self.tok.kind != "eof":
            self.error({"end of input"})

    def name_list(self, what="identifier") -> list[Token]:
        names = [self.ident(what)]
        while self.accept(","):
            names.append(self.ident(what))
        return names

    # -- literals
    LITERAL_START = {"integer", "string", "true", "false", "null", "@ref", "'-'"}

    def at_literal(self) -> bool:
        return (self.tok.kind in ("int", "string", "ref")
                or self.at("true", "false", "null")
                or (self.at("-") and self.tokens[self.i + 1].kind == "int"))

    def literal(self):
        t = self.tok
        if t.kind == "int":
            self.advance()
            return int(t.text)
        if self.at("-") and self.tokens[self.i + 1].kind == "int":
            self.advance()
            return -int(self.advance().text)
        if t.kind == "string":
            self.advance()
            try:
                return json.loads(t.text)
            except ValueError:
                raise DslSyntaxError("bad string escape", t.span.line, t.span.col,
                                     doc=self.doc) from None
        if t.kind == "ref":
            self.advance()
            return Ref(t.text[1:])
        if self.accept("true"):
            return True
        if self.accept("false"):
            return False
        if self.accept("null"):
            return NULL
        self.error(self.LITERAL_START)

    def literal_list(self) -> tuple:
        """Parenthesized, possibly empty, comma-separated literals."""
        self.expect("(")
        vals = []
        if not self.at(")"):
            vals.append(self.literal())
            while self.accept(","):
                vals.append(self.literal())
        self.expect(")")
        return tuple(vals)

    # -- expressions (precedence climbing)
    EXPR_START = {"identifier", "integer", "string", "true", "false", "null",
                  "@ref", "'('", "'-'", "'not'"}

    def expression(self) -> Expr:
        return self._or()

    def _or(self):
        e = self._and()
        while self.accept("or"):
            e = Binary("or", e, self._and())
        return e

    def _and(self):
        e = self._not()
        while self.accept("and"):
            e = Binary("and", e, self._not())
        return e

    def _not(self):
        if self.accept("not"):
            return Unary("not", self._not())
        return self._cmp()

    def _cmp(self):
        e = self._add()
        if self.at("==", "!=", "<", "<=", ">", ">="):
            op = self.advance().text
            e = Binary(op, e, self._add())
            if self.at("==", "!=", "<", "<=", ">", ">="):
                self.error(set(), "comparison operators do not chain")
        return e

    def _add(self):
        e = self._mul()
        while self.at("+", "-"):
            op = self.advance().text
            e = Binary(op, e, self._mul())
        return e

    def _mul(self):
        e = self._unary()
        while self.at("*", "div"):
            op = self.advance().text
            e = Binary(op, e, self._unary())
        return e

    def _unary(self):
        if self.at("-") and self.tokens[self.i + 1].kind == "int":
            return Lit(self.literal())
        if self.accept("-"):
            return Unary("-", self._unary())
        return self._atom()

    def _atom(self):
        t = self.tok
        if self.accept("("):
            e = self.expression()
            self.expect(")")
            return e
        if t.kind == "ident":
            self.advance()
            return Var(t.text)
        if t.kind in ("int", "string", "ref") or self.at("true", "false", "null"):
            return Lit(self.literal())
        self.error(self.EXPR_START)


def parse_expr(text: str) -> Expr:
    p = BaseParser(text)
    e = p.expression()
    p.expect_eof()
    return e
