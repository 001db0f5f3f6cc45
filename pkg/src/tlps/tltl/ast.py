"""TLTL abstract syntax.

Formulas are immutable, hashable trees. Structural equality is dataclass
equality, which is what the parser round-trip relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Tuple, Union

import numpy as np

RHO_MAX = 1.0e4


@dataclass(frozen=True)
class Affine:
    """f(s) = w.s + b"""

    w: Tuple[float, ...]
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "w", tuple(float(v) for v in self.w))
        object.__setattr__(self, "b", float(self.b))
        if not all(math.isfinite(v) for v in self.w) or not math.isfinite(self.b):
            raise ValueError("affine coefficients must be finite")

    @property
    def dim(self) -> int:
        return len(self.w)

    # value() and values() use the same operation order so that scalar and
    # vectorized evaluation agree bit for bit.
    def value(self, s) -> float:
        acc = 0.0
        for i, wi in enumerate(self.w):
            acc = acc + wi * float(s[i])
        return acc + self.b

    def values(self, states: np.ndarray) -> np.ndarray:
        acc = np.zeros(states.shape[:-1])
        for i, wi in enumerate(self.w):
            acc = acc + wi * states[..., i]
        return acc + self.b

    def grad(self, states: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.w), states.shape).copy()


@dataclass(frozen=True)
class Distance:
    """f(s) = ||(s_i, s_j) - (c_i, c_j)||"""

    i: int
    j: int
    ci: float
    cj: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("distance predicate needs two distinct components")
        if self.i < 0 or self.j < 0:
            raise ValueError("component indices must be non-negative")
        object.__setattr__(self, "ci", float(self.ci))
        object.__setattr__(self, "cj", float(self.cj))

    @property
    def dim(self) -> int:
        return max(self.i, self.j) + 1

    def value(self, s) -> float:
        di = float(s[self.i]) - self.ci
        dj = float(s[self.j]) - self.cj
        return math.sqrt(di * di + dj * dj)

    def values(self, states: np.ndarray) -> np.ndarray:
        di = states[..., self.i] - self.ci
        dj = states[..., self.j] - self.cj
        return np.sqrt(di * di + dj * dj)

    def grad(self, states: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. the full state; zero where the point sits on the center."""
        g = np.zeros(states.shape)
        f = self.values(states)
        ok = f > 0.0
        safe = np.where(ok, f, 1.0)
        g[..., self.i] = np.where(ok, (states[..., self.i] - self.ci) / safe, 0.0)
        g[..., self.j] = np.where(ok, (states[..., self.j] - self.cj) / safe, 0.0)
        return g


PredicateFn = Union[Affine, Distance]


class Formula:
    """Base class of every TLTL node."""

    __slots__ = ()

    def children(self) -> Tuple["Formula", ...]:
        return ()

    def __and__(self, other: "Formula") -> "And":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Or":
        return Or(self, other)

    def __invert__(self) -> "Not":
        return Not(self)

    def __str__(self) -> str:
        from .printer import to_text

        return to_text(self)


@dataclass(frozen=True, repr=False)
class TrueF(Formula):
    def __repr__(self):
        return "TrueF()"


@dataclass(frozen=True, repr=False)
class Pred(Formula):
    fn: PredicateFn
    op: str
    c: float

    def __post_init__(self):
        if self.op not in ("<", ">"):
            raise ValueError(f"comparator must be '<' or '>', got {self.op!r}")
        object.__setattr__(self, "c", float(self.c))

    def margin(self, s) -> float:
        f = self.fn.value(s)
        return self.c - f if self.op == "<" else f - self.c

    def margins(self, states: np.ndarray) -> np.ndarray:
        f = self.fn.values(states)
        return self.c - f if self.op == "<" else f - self.c

    def margin_grad(self, states: np.ndarray) -> np.ndarray:
        g = self.fn.grad(states)
        return -g if self.op == "<" else g

    def __repr__(self):
        return f"Pred({self.fn!r}, {self.op!r}, {self.c!r})"


@dataclass(frozen=True, repr=False)
class Not(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"Not({self.arg!r})"


@dataclass(frozen=True, repr=False)
class And(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"And({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Or(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"Or({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Implies(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"Implies({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Eventually(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"Eventually({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Always(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"Always({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Next(Formula):
    arg: Formula

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"Next({self.arg!r})"


@dataclass(frozen=True, repr=False)
class Until(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"Until({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Then(Formula):
    left: Formula
    right: Formula

    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"Then({self.left!r}, {self.right!r})"


TEMPORAL = (Eventually, Always, Next, Until, Then)


def walk(phi: Formula) -> Iterator[Formula]:
    """Pre-order traversal."""
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def is_temporal(phi: Formula) -> bool:
    """True when the value of ``phi`` depends on where the window ends."""
    return any(isinstance(n, TEMPORAL) for n in walk(phi))


def predicates(phi: Formula) -> list:
    """Distinct predicate leaves in first-seen order."""
    seen = {}
    for node in walk(phi):
        if isinstance(node, Pred) and node not in seen:
            seen[node] = len(seen)
    return list(seen)


def max_component(phi: Formula) -> int:
    """Smallest state dimension that every predicate can read."""
    return max((p.fn.dim for p in predicates(phi)), default=0)


def read_components(phi: Formula) -> Tuple[int, ...]:
    """Sorted state components that some predicate depends on."""
    out = set()
    for p in predicates(phi):
        if isinstance(p.fn, Affine):
            out.update(i for i, wi in enumerate(p.fn.w) if wi != 0.0)
        else:
            out.update((p.fn.i, p.fn.j))
    return tuple(sorted(out))
