"""Recursive-descent parser for the formula grammar.

    formula := 'forall' VAR '.' formula | 'exists' VAR '.' formula | iff
    iff     := imp ('<->' imp)*
    imp     := or ('->' or)*          (right-associative)
    or      := and ('|' and)*
    and     := unary ('&' unary)*
    unary   := '!' unary | '(' formula ')' | atom | 'true' | 'false'
    atom    := SYMBOL '(' VAR (',' VAR)* ')'

VAR is a lowercase identifier, SYMBOL an identifier starting uppercase.
'<->' is desugared to a conjunction of two implications. Relation arities
are inferred from first use and enforced across the whole input.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .formulas import (
    And,
    ArityConflict,
    Atom,
    BOTTOM,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    RelationSymbol,
    TOP,
    Vocabulary,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<op><->|->|\||&|!|\(|\)|,|\.)
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"forall", "exists", "true", "false"}


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        if m.lastgroup == "ws":
            chunk = m.group()
            newlines = chunk.count("\n")
            if newlines:
                line += newlines
                line_start = m.start() + chunk.rfind("\n") + 1
        else:
            column = m.start() - line_start + 1
            kind = m.lastgroup
            word = m.group()
            if kind == "ident":
                if word in _KEYWORDS:
                    kind = word
                elif word[0].isupper():
                    kind = "symbol"
                else:
                    kind = "var"
            tokens.append(_Token(kind, word, line, column))
        pos = m.end()
    tokens.append(_Token("eof", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, vocab: Optional[Vocabulary]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.vocab = vocab if vocab is not None else Vocabulary()

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.line, tok.column)
        return self.next()

    def parse(self) -> Formula:
        f = self.formula()
        tok = self.peek()
        if tok.kind != "eof":
            raise ParseError(f"trailing input {tok.text!r}", tok.line, tok.column)
        return f

    def formula(self) -> Formula:
        tok = self.peek()
        if tok.kind in ("forall", "exists"):
            self.next()
            var = self.expect("var").text
            self.expect_op(".")
            body = self.formula()
            return Forall(var, body) if tok.kind == "forall" else Exists(var, body)
        return self.iff()

    def expect_op(self, text: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.column)
        self.next()

    def at_op(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text == text

    def iff(self) -> Formula:
        parts = [self.imp()]
        while self.at_op("<->"):
            self.next()
            parts.append(self.imp())
        f = parts[-1]
        for left in reversed(parts[:-1]):
            f = And(Implies(left, f), Implies(f, left))
        return f

    def imp(self) -> Formula:
        parts = [self.or_()]
        while self.at_op("->"):
            self.next()
            parts.append(self.or_())
        f = parts[-1]
        for left in reversed(parts[:-1]):
            f = Implies(left, f)
        return f

    def or_(self) -> Formula:
        f = self.and_()
        while self.at_op("|"):
            self.next()
            f = Or(f, self.and_())
        return f

    def and_(self) -> Formula:
        f = self.unary()
        while self.at_op("&"):
            self.next()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        tok = self.peek()
        if self.at_op("!"):
            self.next()
            return Not(self.unary())
        if self.at_op("("):
            self.next()
            f = self.formula()
            self.expect_op(")")
            return f
        if tok.kind == "true":
            self.next()
            return TOP
        if tok.kind == "false":
            self.next()
            return BOTTOM
        if tok.kind == "symbol":
            return self.atom()
        raise ParseError(f"expected a formula, found {tok.text or 'end of input'!r}", tok.line, tok.column)

    def atom(self) -> Formula:
        name_tok = self.expect("symbol")
        self.expect_op("(")
        args = [self.expect("var").text]
        while self.at_op(","):
            self.next()
            args.append(self.expect("var").text)
        self.expect_op(")")
        sym = RelationSymbol(name_tok.text, len(args))
        known = self.vocab.get(sym.name)
        if known is not None and known.arity != sym.arity:
            raise ParseError(
                f"relation symbol {sym.name!r} used with arity {sym.arity}, "
                f"previously {known.arity}",
                name_tok.line,
                name_tok.column,
            )
        self.vocab.add(sym)
        return Atom(sym, tuple(args))


def parse(text: str, vocab: Optional[Vocabulary] = None) -> Formula:
    """Parse one formula; a shared Vocabulary enforces arities across calls."""
    return _Parser(text, vocab).parse()
