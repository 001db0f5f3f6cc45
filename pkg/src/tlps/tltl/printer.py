"""Formula -> text (re-parses to an equal tree) and an indented tree dump."""
from __future__ import annotations

from typing import Optional, Sequence

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
    walk,
)

# binding strength; higher binds tighter
_IMPLIES, _OR, _AND, _UNARY, _ATOM = range(5)
_UNARY_OPS = {Not: "!", Eventually: "F", Always: "G", Next: "X"}


def _num(x: float) -> str:
    return repr(float(x))


def _names(n: int, names: Optional[Sequence[str]]) -> Sequence[str]:
    return list(names) if names is not None else [f"s{i}" for i in range(n)]


def _pred_text(p: Pred, names: Optional[Sequence[str]]) -> str:
    fn = p.fn
    if isinstance(fn, Distance):
        nm = _names(fn.dim, names)
        lhs = f"dist({nm[fn.i]}, {nm[fn.j]}; {_num(fn.ci)}, {_num(fn.cj)})"
    else:
        nm = _names(fn.dim, names)
        parts = []
        for i, w in enumerate(fn.w):
            if w == 0.0:
                continue
            mag = -w if w < 0 else w
            term = nm[i] if mag == 1.0 else f"{_num(mag)}*{nm[i]}"
            parts.append(("-" if w < 0 else "+", term))
        if fn.b != 0.0 or not parts:
            mag = -fn.b if fn.b < 0 else fn.b
            parts.append(("-" if fn.b < 0 else "+", _num(mag)))
        sign, first = parts[0]
        lhs = ("-" if sign == "-" else "") + first
        for sign, term in parts[1:]:
            lhs += f" {sign} {term}"
    return f"{lhs} {p.op} {_num(p.c)}"


def _prec(phi: Formula) -> int:
    if isinstance(phi, Implies):
        return _IMPLIES
    if isinstance(phi, Or):
        return _OR
    if isinstance(phi, And):
        return _AND
    if type(phi) in _UNARY_OPS:
        return _UNARY
    return _ATOM


def to_text(phi: Formula, names: Optional[Sequence[str]] = None) -> str:
    """Render ``phi`` with the minimum parentheses the grammar needs."""

    def wrap(node: Formula, min_prec: int) -> str:
        s = go(node)
        return f"({s})" if _prec(node) < min_prec else s

    def go(node: Formula) -> str:
        if isinstance(node, TrueF):
            return "true"
        if isinstance(node, Pred):
            return _pred_text(node, names)
        op = _UNARY_OPS.get(type(node))
        if op is not None:
            return f"{op} {wrap(node.arg, _UNARY)}" if op != "!" else f"!{wrap(node.arg, _UNARY)}"
        if isinstance(node, (Until, Then)):
            sym = "U" if isinstance(node, Until) else "T"
            return f"({go(node.left)} {sym} {go(node.right)})"
        if isinstance(node, Implies):
            # right-associative
            return f"{wrap(node.left, _OR)} -> {wrap(node.right, _IMPLIES)}"
        sym, prec = ("|", _OR) if isinstance(node, Or) else ("&", _AND)
        # left-associative
        return f"{wrap(node.left, prec)} {sym} {wrap(node.right, prec + 1)}"

    return go(phi)


def to_spec(phi: Formula, names: Sequence[str]) -> str:
    """Full spec-file text: declarations followed by the formula."""
    decl = "".join(f"var {n} : {i};\n" for i, n in enumerate(names))
    return decl + to_text(phi, names) + "\n"


def tree(phi: Formula, names: Optional[Sequence[str]] = None) -> str:
    """Indented one-node-per-line dump used by ``tlps parse``."""
    lines = []

    def go(node: Formula, depth: int) -> None:
        pad = "  " * depth
        if isinstance(node, Pred):
            kind = "distance" if isinstance(node.fn, Distance) else "affine"
            lines.append(f"{pad}Predicate[{kind}] {_pred_text(node, names)}")
        elif isinstance(node, TrueF):
            lines.append(f"{pad}True")
        else:
            lines.append(f"{pad}{type(node).__name__}")
        for ch in node.children():
            go(ch, depth + 1)

    go(phi, 0)
    return "\n".join(lines)


def node_counts(phi: Formula) -> dict:
    """Node-kind histogram of the syntax tree."""
    counts: dict = {}
    for node in walk(phi):
        name = "Predicate" if isinstance(node, Pred) else "True" if isinstance(node, TrueF) else type(node).__name__
        counts[name] = counts.get(name, 0) + 1
    return counts
