"""Tokenizer and recursive-descent parser for reward programs.

Grammar (``#`` starts a comment; newlines inside brackets are ignored)::

    program    := line+
    line       := "sub" NAME "=" expr | "total" "=" expr
    expr       := additive (CMP additive)?
    additive   := term (("+" | "-") term)*
    term       := unary (("*" | "/") unary)*
    unary      := "-" unary | primary
    primary    := NUMBER | NAME | NAME "[" INT "]" | NAME "(" args ")" | "(" expr ")"
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..errors import ExtractError, ParseError
from .ast import (
    COMPARISON_OPS,
    FUNCTIONS,
    KEYWORDS,
    BinOp,
    Call,
    Compare,
    Index,
    Neg,
    Num,
    Ref,
    RewardProgram,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|==|[-+*/<>=(),\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number, name, op, newline, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    depth = 0
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind == "newline":
            if depth == 0 and tokens and tokens[-1].kind != "newline":
                tokens.append(Token("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind in ("number", "name", "op"):
            if value in ("(", "["):
                depth += 1
            elif value in (")", "]"):
                depth = max(depth - 1, 0)
            tokens.append(Token(kind, value, line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.open_brackets: list[Token] = []

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message: str, expected=()):
        tok = self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        if tok.kind in ("eof", "newline") and self.open_brackets:
            # point at the bracket that was never closed, not at the end
            opener = self.open_brackets[-1]
            message = f"unclosed {opener.text!r}; found {found}"
            raise ParseError(message, opener.line, opener.col, expected)
        raise ParseError(f"{message}; found {found}", tok.line, tok.col, expected)

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind not in ("op", "name"):
            self.error(f"expected {text!r}", (text,))
        return self.advance()

    def expect_name(self) -> Token:
        if self.tok.kind != "name":
            self.error("expected a name", ("NAME",))
        return self.advance()

    # -- statements ----------------------------------------------------------

    def program(self, source: str) -> RewardProgram:
        subs = []
        names = set()
        total = None
        while self.tok.kind == "newline":
            self.advance()
        while self.tok.kind != "eof":
            start = self.tok
            if start.text == "sub" and start.kind == "name":
                self.advance()
                name_tok = self.expect_name()
                name = name_tok.text
                if name in KEYWORDS or name in FUNCTIONS:
                    raise ParseError(f"{name!r} is reserved", name_tok.line, name_tok.col)
                if name in names:
                    raise ParseError(
                        f"duplicate sub-reward name {name!r}", name_tok.line, name_tok.col
                    )
                self.expect("=")
                subs.append((name, self.expr()))
                names.add(name)
            elif start.text == "total" and start.kind == "name":
                if total is not None:
                    raise ParseError("duplicate total binding", start.line, start.col)
                self.advance()
                self.expect("=")
                total = self.expr()
            else:
                self.error("expected a binding", ("sub", "total"))
            if self.tok.kind == "newline":
                while self.tok.kind == "newline":
                    self.advance()
            elif self.tok.kind != "eof":
                self.error("expected end of line", ("NEWLINE",))
        if not subs:
            raise ParseError("a program needs at least one sub binding", 1, 1, ("sub",))
        return RewardProgram(tuple(subs), total, source)

    # -- expressions ---------------------------------------------------------

    def expr(self):
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in COMPARISON_OPS:
            op = self.advance().text
            right = self.additive()
            if self.tok.kind == "op" and self.tok.text in COMPARISON_OPS:
                self.error("comparisons cannot be chained")
            return Compare(op, left, right)
        return left

    def additive(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "number":
            value = float(tok.text)
            if not math.isfinite(value):
                self.error("numeric literal out of range")
            self.advance()
            return Num(value)
        if tok.kind == "op" and tok.text == "(":
            self.open_brackets.append(self.advance())
            node = self.expr()
            self.expect(")")
            self.open_brackets.pop()
            return node
        if tok.kind == "name":
            if tok.text in KEYWORDS:
                self.error(f"{tok.text!r} cannot be used in an expression")
            self.advance()
            nxt = self.tok
            if nxt.kind == "op" and nxt.text == "(":
                self.open_brackets.append(self.advance())
                args = [self.expr()]
                while self.tok.kind == "op" and self.tok.text == ",":
                    self.advance()
                    args.append(self.expr())
                if not (self.tok.kind == "op" and self.tok.text == ")"):
                    self.error("expected ',' or ')'", (",", ")"))
                self.advance()
                self.open_brackets.pop()
                return Call(tok.text, tuple(args))
            if nxt.kind == "op" and nxt.text == "[":
                self.open_brackets.append(self.advance())
                idx = self.tok
                if idx.kind != "number" or not idx.text.isdigit():
                    self.error("expected an integer index", ("INT",))
                self.advance()
                self.expect("]")
                self.open_brackets.pop()
                return Index(tok.text, int(idx.text))
            return Ref(tok.text)
        self.error("expected an expression", ("NUMBER", "NAME", "(", "-"))


def parse(text: str, schema=None, action_space=None) -> RewardProgram:
    """Parse program text into a :class:`RewardProgram`.

    Parsing is purely syntactic; ``schema`` and ``action_space`` are accepted
    for interface symmetry with :func:`typecheck` and are not consulted.
    """
    return _Parser(text).program(text)


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)(?:```|\Z)", re.DOTALL)


def extract_program(llm_text: str) -> str:
    """Pull the program text out of a chat reply.

    The first triple-backtick block wins. Without a fence, the whole reply is
    accepted only if it parses as a program.
    """
    m = _FENCE_RE.search(llm_text)
    if m:
        return m.group(1).strip("\n")
    text = llm_text.strip()
    try:
        parse(text)
    except ParseError as exc:
        raise ExtractError(f"no fenced code block and reply does not parse: {exc}") from exc
    return text
