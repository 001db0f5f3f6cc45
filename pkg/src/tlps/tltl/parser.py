"""Recursive-descent parser for TLTL specification text.

Grammar, loosest binding first::

    spec     := decl* formula
    decl     := "var" IDENT ":" INT ";"
    implies  := or ( "->" or )*            right-associative
    or       := and ( "|" and )*
    and      := unary ( "&" unary )*
    unary    := "!" unary | "F" unary | "G" unary | "X" unary | atom
    atom     := "(" formula ")" | "(" formula ("U"|"T") formula ")"
              | pred | "true"
    pred     := linexpr ("<"|">") NUMBER
              | "dist" "(" IDENT "," IDENT ";" NUMBER "," NUMBER ")" ("<"|">") NUMBER
    linexpr  := term (("+"|"-") term)*
    term     := NUMBER "*" IDENT | IDENT | NUMBER

Numbers may carry a leading sign, and the first term of a linear expression
may be negated. ``#`` starts a comment that runs to the end of the line.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

from .ast import (
    Affine,
    Always,
    And,
    Distance,
    Eventually,
    Formula,
    Implies,
    Next,
    Not,
    Or,
    Pred,
    Then,
    TrueF,
    Until,
)

KEYWORDS = {"var", "true", "dist", "F", "G", "X", "U", "T"}


class SpecError(ValueError):
    """Any failure turning specification text into a formula."""


class ParseError(SpecError):
    def __init__(self, message: str, line: int, col: int, expected: Iterable[str] = ()):
        self.line = line
        self.col = col
        self.expected = tuple(sorted(set(expected)))
        self.reason = message
        where = f"line {line}, column {col}"
        exp = f"; expected {' or '.join(self.expected)}" if self.expected else ""
        super().__init__(f"{where}: {message}{exp}")


class VariableMap:
    """Ordered name -> state-index table. Indices must cover [0, n)."""

    def __init__(self, items: Iterable[Tuple[str, int]] = ()):
        self._items: List[Tuple[str, int]] = []
        self._index = {}
        for name, idx in items:
            self.add(name, idx)
        self.validate()

    def add(self, name: str, idx: int) -> None:
        if name in KEYWORDS:
            raise SpecError(f"'{name}' is reserved and cannot name a variable")
        if name in self._index:
            raise SpecError(f"variable '{name}' declared twice")
        if idx in self._index.values():
            raise SpecError(f"state index {idx} bound to two variables")
        self._items.append((name, int(idx)))
        self._index[name] = int(idx)

    def validate(self) -> None:
        idx = sorted(self._index.values())
        if idx != list(range(len(idx))):
            raise SpecError(f"variable indices {idx} do not cover 0..{len(idx) - 1}")

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "VariableMap":
        return cls((n, i) for i, n in enumerate(names))

    @property
    def dim(self) -> int:
        return len(self._items)

    @property
    def names(self) -> List[str]:
        """Names ordered by state index."""
        return [n for n, _ in sorted(self._items, key=lambda p: p[1])]

    def index(self, name: str) -> int:
        return self._index[name]

    def __contains__(self, name) -> bool:
        return name in self._index

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __eq__(self, other):
        return isinstance(other, VariableMap) and dict(self._items) == dict(other._items)

    def __repr__(self):
        return f"VariableMap({self._items!r})"


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, NUMBER, OP, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>->|[()<>&|!,;:+\-*])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> List[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "number":
            tokens.append(Token("NUMBER", m.group(), line, col))
        elif kind == "ident":
            tokens.append(Token("IDENT", m.group(), line, col))
        elif kind == "op":
            tokens.append(Token("OP", m.group(), line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str, vars: Optional[VariableMap]):
        self.toks = tokenize(text)
        self.i = 0
        self.vars = vars

    # -- token helpers --------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("OP", "IDENT") and t.text == text

    def fail(self, expected: Iterable[str], message: Optional[str] = None):
        t = self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.text)
        raise ParseError(message or f"unexpected {found}", t.line, t.col, expected)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail([repr(text)])
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "IDENT" or t.text in KEYWORDS:
            self.fail(["identifier"])
        self.i += 1
        return t

    def number(self) -> float:
        sign = 1.0
        if self.at("-") or self.at("+"):
            sign = -1.0 if self.tok.text == "-" else 1.0
            self.i += 1
        t = self.tok
        if t.kind != "NUMBER":
            self.fail(["number"])
        self.i += 1
        return sign * float(t.text)

    # -- declarations ---------------------------------------------------
    def decls(self) -> Optional[VariableMap]:
        if not self.at("var"):
            return None
        items = []
        while self.at("var"):
            self.i += 1
            name = self.ident()
            self.expect(":")
            t = self.tok
            if t.kind != "NUMBER" or not t.text.isdigit():
                self.fail(["non-negative integer"])
            self.i += 1
            self.expect(";")
            items.append((name, int(t.text)))
        vm = VariableMap()
        for name, idx in items:
            try:
                vm.add(name.text, idx)
            except SpecError as e:
                raise ParseError(str(e), name.line, name.col) from None
        try:
            vm.validate()
        except SpecError as e:
            raise ParseError(str(e), items[0][0].line, items[0][0].col) from None
        return vm

    # -- formulas -------------------------------------------------------
    def formula(self) -> Formula:
        return self.implies()

    def implies(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.i += 1
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        node = self.conj()
        while self.at("|"):
            self.i += 1
            node = Or(node, self.conj())
        return node

    def conj(self) -> Formula:
        node = self.unary()
        while self.at("&"):
            self.i += 1
            node = And(node, self.unary())
        return node

    def unary(self) -> Formula:
        for text, cls in (("!", Not), ("F", Eventually), ("G", Always), ("X", Next)):
            if self.at(text):
                self.i += 1
                return cls(self.unary())
        return self.atom()

    def atom(self) -> Formula:
        if self.at("("):
            self.i += 1
            inner = self.formula()
            if self.at("U") or self.at("T"):
                cls = Until if self.tok.text == "U" else Then
                self.i += 1
                right = self.formula()
                self.expect(")")
                return cls(inner, right)
            if not self.at(")"):
                self.fail(["')'", "'U'", "'T'", "'&'", "'|'", "'->'"])
            self.i += 1
            return inner
        if self.at("true"):
            self.i += 1
            return TrueF()
        if self.at("dist"):
            return self.dist_pred()
        t = self.tok
        if t.kind in ("NUMBER", "IDENT") or self.at("-") or self.at("+"):
            if t.kind == "IDENT" and t.text in KEYWORDS:
                self.fail(_ATOM_START)
            return self.lin_pred()
        self.fail(_ATOM_START)

    def var_index(self, tok: Token) -> int:
        if self.vars is None:
            raise ParseError(f"no variables declared, cannot resolve '{tok.text}'", tok.line, tok.col)
        if tok.text not in self.vars:
            raise ParseError(f"unknown variable '{tok.text}'", tok.line, tok.col)
        return self.vars.index(tok.text)

    def comparator(self) -> str:
        if self.at("<") or self.at(">"):
            op = self.tok.text
            self.i += 1
            return op
        self.fail(["'<'", "'>'"])

    def lin_pred(self) -> Pred:
        n = self.vars.dim if self.vars is not None else 0
        w = [0.0] * n
        b = 0.0
        sign = 1.0
        if self.at("-") or self.at("+"):
            sign = -1.0 if self.tok.text == "-" else 1.0
            self.i += 1
        while True:
            t = self.tok
            if t.kind == "NUMBER":
                self.i += 1
                value = sign * float(t.text)
                if self.at("*"):
                    self.i += 1
                    v = self.ident()
                    w[self.var_index(v)] += value
                else:
                    b += value
            elif t.kind == "IDENT" and t.text not in KEYWORDS:
                self.i += 1
                w[self.var_index(t)] += sign
            else:
                self.fail(["number", "identifier"])
            if self.at("+") or self.at("-"):
                sign = -1.0 if self.tok.text == "-" else 1.0
                self.i += 1
                continue
            break
        op = self.comparator()
        c = self.number()
        return Pred(Affine(tuple(w), b), op, c)

    def dist_pred(self) -> Pred:
        self.expect("dist")
        self.expect("(")
        a = self.ident()
        self.expect(",")
        b = self.ident()
        if a.text == b.text:
            raise ParseError("dist() needs two distinct variables", b.line, b.col)
        ia, ib = self.var_index(a), self.var_index(b)
        self.expect(";")
        ca = self.number()
        self.expect(",")
        cb = self.number()
        self.expect(")")
        op = self.comparator()
        c = self.number()
        return Pred(Distance(ia, ib, ca, cb), op, c)


_ATOM_START = ["'('", "'!'", "'F'", "'G'", "'X'", "'true'", "'dist'", "number", "identifier"]


def parse_spec(text: str, vars: Optional[VariableMap] = None) -> Tuple[VariableMap, Formula]:
    """Parse a full spec file: optional ``var`` declarations then one formula.

    When both declarations and ``vars`` are supplied they must agree.
    """
    p = _Parser(text, vars)
    declared = p.decls()
    if declared is not None:
        if vars is not None and declared != vars:
            t = p.toks[0]
            raise ParseError(
                f"declared variables {declared.names} do not match the expected {vars.names}",
                t.line,
                t.col,
            )
        p.vars = declared
    phi = p.formula()
    if p.tok.kind != "EOF":
        p.fail(["end of input", "'&'", "'|'", "'->'"])
    vm = p.vars
    if vm is None:
        vm = VariableMap()
    return vm, phi


def parse(text: str, vars: Optional[VariableMap] = None) -> Formula:
    return parse_spec(text, vars)[1]


def parse_file(path) -> Tuple[VariableMap, Formula]:
    with open(path, encoding="utf-8") as fh:
        return parse_spec(fh.read())
