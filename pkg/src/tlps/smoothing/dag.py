"""Log-sum-exp smoothed robustness as a differentiable DAG.

``build_dag`` expands a formula over a fixed horizon into max/min nodes whose
leaves are predicate margins at specific time steps, mirroring the exact
recursion of :mod:`tlps.tltl.semantics` window for window. Negation is pushed
to the leaves (it swaps max and min), chains of the same Boolean connective
become one n-ary node, and one-child nodes are elided. With hard max/min the
DAG therefore reproduces the exact robustness bit for bit; with a finite beta
every max becomes ``(1/b) log sum exp(b x)`` and every min its mirror image.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .. import _accel
from ..tltl.ast import (
    RHO_MAX,
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
    is_temporal,
)
from ..tltl.semantics import as_states
from . import kernels
from .kernels import CONST, LEAF, MAX, MIN

KIND_NAMES = {LEAF: "Leaf", CONST: "Const", MAX: "SoftMax", MIN: "SoftMin"}


class DegenerateGradientWarning(RuntimeWarning):
    """A distance predicate was differentiated exactly at its center."""


@dataclass(frozen=True)
class SmoothingParams:
    beta: float
    rho_max: float = RHO_MAX

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")


@dataclass
class _Level:
    nodes: np.ndarray
    sgn_node: np.ndarray
    flat: np.ndarray
    sgn_edge: np.ndarray
    starts: np.ndarray
    seg: np.ndarray


class SoftDag:
    """Compiled DAG. Immutable after construction; evaluation allocates per call."""

    def __init__(self, kind, ptr, child, leaf_pred, leaf_time, leaf_sign, const, preds, horizon, dim):
        self.kind = np.asarray(kind, dtype=np.int8)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.child = np.asarray(child, dtype=np.int64)
        self.leaf_pred = np.asarray(leaf_pred, dtype=np.int64)
        self.leaf_time = np.asarray(leaf_time, dtype=np.int64)
        self.leaf_sign = np.asarray(leaf_sign, dtype=float)
        self.const = np.asarray(const, dtype=float)
        self.preds: List[Pred] = list(preds)
        self.horizon = int(horizon)
        self.dim = int(dim)
        self.leaf_ids = np.flatnonzero(self.kind == LEAF)
        self.const_ids = np.flatnonzero(self.kind == CONST)
        self._levels = None

    # -- inspection -----------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.kind)

    @property
    def n_edges(self) -> int:
        return len(self.child)

    @property
    def root(self) -> int:
        return self.n_nodes - 1

    def children(self, i: int) -> List[int]:
        return self.child[self.ptr[i] : self.ptr[i + 1]].tolist()

    def kind_name(self, i: int) -> str:
        return KIND_NAMES[int(self.kind[i])]

    def leaf_info(self, i: int) -> Tuple[Pred, int, float]:
        return self.preds[self.leaf_pred[i]], int(self.leaf_time[i]), float(self.leaf_sign[i])

    def __repr__(self):
        counts = {KIND_NAMES[k]: int(np.sum(self.kind == k)) for k in KIND_NAMES}
        return f"SoftDag(T={self.horizon}, edges={self.n_edges}, {counts})"

    @property
    def levels(self) -> List[_Level]:
        """Per-depth edge lists for the vectorized numpy sweeps."""
        if self._levels is None:
            depth = np.zeros(self.n_nodes, dtype=np.int64)
            for i in range(self.n_nodes):
                if self.kind[i] >= MAX:
                    depth[i] = 1 + depth[self.child[self.ptr[i] : self.ptr[i + 1]]].max()
            levels = []
            for d in range(1, int(depth.max(initial=0)) + 1):
                nodes = np.flatnonzero(depth == d)
                counts = self.ptr[nodes + 1] - self.ptr[nodes]
                flat = np.concatenate([self.child[self.ptr[i] : self.ptr[i + 1]] for i in nodes])
                starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
                seg = np.repeat(np.arange(len(nodes)), counts)
                sgn_node = np.where(self.kind[nodes] == MAX, 1.0, -1.0)
                levels.append(_Level(nodes, sgn_node, flat, sgn_node[seg], starts, seg))
            self._levels = levels
        return self._levels

    # -- evaluation -----------------------------------------------------
    def _leaf_values(self, states: np.ndarray) -> np.ndarray:
        """(n_nodes, B) buffer with leaves and constants filled in."""
        B = states.shape[0]
        values = np.zeros((self.n_nodes, B))
        if len(self.preds):
            margins = np.stack([p.margins(states) for p in self.preds])  # (P, B, T)
            lp, lt = self.leaf_pred[self.leaf_ids], self.leaf_time[self.leaf_ids]
            values[self.leaf_ids] = self.leaf_sign[self.leaf_ids, None] * margins[lp, :, lt]
        values[self.const_ids] = self.const[self.const_ids, None]
        return values

    def _check(self, states) -> np.ndarray:
        s = np.asarray(states, dtype=float)
        if s.ndim == 2:
            s = s[None]
        if s.ndim != 3 or s.shape[1] != self.horizon:
            raise ValueError(f"expected trajectories of length {self.horizon}, got shape {s.shape}")
        if s.shape[2] < self.dim:
            raise ValueError(f"predicates read {self.dim} state components, trajectory has {s.shape[2]}")
        return s

    def forward(self, states, beta: Optional[float], backend: Optional[str] = None) -> np.ndarray:
        """All node values for a (B, T, n) batch; ``beta=None`` means hard max/min."""
        s = self._check(states)
        values = self._leaf_values(s)
        hard = beta is None
        kernels.forward(self, values, 1.0 if hard else beta, hard, backend or _accel.DEFAULT_BACKEND)
        return values

    def value(self, states, beta: Optional[float], backend: Optional[str] = None) -> np.ndarray:
        return self.forward(states, beta, backend)[self.root]

    def value_and_grad(self, states, beta: Optional[float], backend: Optional[str] = None):
        """Root values (B,) and gradients (B, T, n) w.r.t. the states."""
        s = self._check(states)
        backend = backend or _accel.DEFAULT_BACKEND
        hard = beta is None
        b = 1.0 if hard else beta
        values = self._leaf_values(s)
        kernels.forward(self, values, b, hard, backend)
        adj = np.zeros_like(values)
        adj[self.root] = 1.0
        kernels.backward(self, values, adj, b, hard, backend)

        B, T, n = s.shape
        grad = np.zeros((B, T, n))
        if len(self.leaf_ids):
            # fold leaf adjoints onto (predicate, time) then apply margin gradients
            P = len(self.preds)
            acc = np.zeros((P, T, B))
            ids = self.leaf_ids
            np.add.at(acc, (self.leaf_pred[ids], self.leaf_time[ids]), self.leaf_sign[ids, None] * adj[ids])
            for p, pred in enumerate(self.preds):
                if not np.any(acc[p]):
                    continue
                g = pred.margin_grad(s)  # (B, T, n)
                if isinstance(pred.fn, Distance):
                    dead = (pred.fn.values(s) == 0.0) & (acc[p].T != 0.0)
                    if np.any(dead):
                        warnings.warn(
                            "distance predicate differentiated at its center; using zero gradient",
                            DegenerateGradientWarning,
                            stacklevel=2,
                        )
                grad += acc[p].T[:, :, None] * g
        return values[self.root], grad

    # -- structure ------------------------------------------------------
    def error_bound(self, beta: float) -> Tuple[float, float]:
        """(lower, upper) slack: sum of log(N_i)/beta over distinct min / max nodes."""
        counts = np.diff(self.ptr)
        lower = float(np.sum(np.log(counts[self.kind == MIN]))) / beta
        upper = float(np.sum(np.log(counts[self.kind == MAX]))) / beta
        return lower, upper

    def collapse(self) -> "SoftDag":
        """Merge every same-kind parent/child pair into one node.

        With one shared beta the merged node has exactly the same smooth value,
        because the inner log and outer exp cancel.
        """
        b = _Builder(self.preds, self.horizon, self.dim)
        memo = {}

        def go(i):
            if i in memo:
                return memo[i]
            k = int(self.kind[i])
            if k == LEAF:
                r = b.leaf(int(self.leaf_pred[i]), int(self.leaf_time[i]), float(self.leaf_sign[i]))
            elif k == CONST:
                r = b.const(float(self.const[i]))
            else:
                flat = []
                stack = list(reversed(self.children(i)))
                while stack:
                    c = stack.pop()
                    if self.kind[c] == k:
                        stack.extend(reversed(self.children(c)))
                    else:
                        flat.append(go(c))
                r = b.op(k, flat)
            memo[i] = r
            return r

        go(self.root)
        return b.finish()

    def active_gap(self, states) -> float:
        """Smallest gap between the best and runner-up child along the active path.

        Evaluated with hard max/min on a single trajectory; ``inf`` when the
        active path contains no node with two or more children.
        """
        values = self.forward(as_states(states), None, backend="numpy")[:, 0]
        gap = math.inf
        i = self.root
        while self.kind[i] >= MAX:
            sgn = 1.0 if self.kind[i] == MAX else -1.0
            ch = self.children(i)
            xs = sgn * values[ch]
            best = int(np.argmax(xs))
            if len(ch) > 1:
                gap = min(gap, float(xs[best] - np.max(np.delete(xs, best))))
            i = ch[best]
        return gap


class _Builder:
    def __init__(self, preds, horizon, dim):
        self.preds = list(preds)
        self.horizon = horizon
        self.dim = dim
        self.kind: List[int] = []
        self.ptr: List[int] = [0]
        self.child: List[int] = []
        self.leaf_pred: List[int] = []
        self.leaf_time: List[int] = []
        self.leaf_sign: List[float] = []
        self.const_val: List[float] = []
        self._leaves = {}
        self._consts = {}

    def _new(self, kind, children=(), pred=-1, time=-1, sign=0.0, const=0.0) -> int:
        self.kind.append(kind)
        self.child.extend(children)
        self.ptr.append(len(self.child))
        self.leaf_pred.append(pred)
        self.leaf_time.append(time)
        self.leaf_sign.append(sign)
        self.const_val.append(const)
        return len(self.kind) - 1

    def leaf(self, pred: int, time: int, sign: float) -> int:
        key = (pred, time, sign)
        if key not in self._leaves:
            self._leaves[key] = self._new(LEAF, pred=pred, time=time, sign=sign)
        return self._leaves[key]

    def const(self, value: float) -> int:
        if value not in self._consts:
            self._consts[value] = self._new(CONST, const=value)
        return self._consts[value]

    def op(self, kind: int, children: List[int]) -> int:
        if len(children) == 1:
            return children[0]
        return self._new(kind, children)

    def finish(self) -> SoftDag:
        return SoftDag(
            self.kind,
            self.ptr,
            self.child,
            self.leaf_pred,
            self.leaf_time,
            self.leaf_sign,
            self.const_val,
            self.preds,
            self.horizon,
            self.dim,
        )


def _chain(phi: Formula, cls) -> List[Formula]:
    """Operands of a left/right nested chain of one connective."""
    out, stack = [], [phi]
    while stack:
        node = stack.pop()
        if type(node) is cls:
            stack.append(node.right)
            stack.append(node.left)
        else:
            out.append(node)
    return out


def build_dag(phi: Formula, T: int, rho_max: float = RHO_MAX) -> SoftDag:
    """Expand ``phi`` over a horizon of ``T`` steps (window [0, T))."""
    if T < 1:
        raise ValueError("horizon must be at least 1")
    preds = {}
    for node in _walk(phi):
        if isinstance(node, Pred) and node not in preds:
            preds[node] = len(preds)
    dim = max((p.fn.dim for p in preds), default=0)
    b = _Builder(list(preds), T, dim)
    memo = {}
    temporal = {}

    def window_key(node, e):
        k = id(node)
        if k not in temporal:
            temporal[k] = (node, is_temporal(node))
        return e if temporal[k][1] else None

    # value of node = pol * rho(s[t:e], phi)
    def go(node: Formula, t: int, e: int, pol: float) -> int:
        key = (id(node), t, window_key(node, e), pol)
        hit = memo.get(key)
        if hit is not None:
            return hit[1]
        r = build(node, t, e, pol)
        memo[key] = (node, r)
        return r

    def hi(pol):
        return MAX if pol > 0 else MIN

    def lo(pol):
        return MIN if pol > 0 else MAX

    def build(node, t, e, pol) -> int:
        if isinstance(node, TrueF):
            return b.const(pol * rho_max)
        if isinstance(node, Pred):
            return b.leaf(preds[node], t, pol)
        if isinstance(node, Not):
            return go(node.arg, t, e, -pol)
        if isinstance(node, And):
            return b.op(lo(pol), [go(c, t, e, pol) for c in _chain(node, And)])
        if isinstance(node, Or):
            return b.op(hi(pol), [go(c, t, e, pol) for c in _chain(node, Or)])
        if isinstance(node, Implies):
            return b.op(hi(pol), [go(node.left, t, e, -pol), go(node.right, t, e, pol)])
        if isinstance(node, Next):
            if t + 1 < e:
                return go(node.arg, t + 1, e, pol)
            return b.const(-pol * rho_max)
        if isinstance(node, Eventually):
            return b.op(hi(pol), [go(node.arg, tp, e, pol) for tp in range(t, e)])
        if isinstance(node, Always):
            return b.op(lo(pol), [go(node.arg, tp, e, pol) for tp in range(t, e)])
        if isinstance(node, (Until, Then)):
            until = isinstance(node, Until)
            inner_kind = lo(pol) if until else hi(pol)
            empty = (1.0 if until else -1.0) * pol * rho_max
            terms = []
            for tp in range(t, e):
                psi = go(node.right, tp, e, pol)
                if tp == t:
                    inner = b.const(empty)
                else:
                    inner = b.op(inner_kind, [go(node.left, tpp, tp, pol) for tpp in range(t, tp)])
                terms.append(b.op(lo(pol), [psi, inner]))
            return b.op(hi(pol), terms)
        raise TypeError(f"unknown formula node {node!r}")

    root = go(phi, 0, T, 1.0)
    dag = b.finish()
    if root != dag.root:
        # root was memoized earlier (e.g. bare leaf); reorder so it is last
        dag = _reroot(dag, root)
    return dag


def _walk(phi):
    stack = [phi]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def _reroot(dag: SoftDag, root: int) -> SoftDag:
    """Keep only nodes reachable from ``root``; renumber children-first."""
    b = _Builder(dag.preds, dag.horizon, dag.dim)
    memo = {}

    def go(i):
        if i in memo:
            return memo[i]
        k = int(dag.kind[i])
        if k == LEAF:
            r = b.leaf(int(dag.leaf_pred[i]), int(dag.leaf_time[i]), float(dag.leaf_sign[i]))
        elif k == CONST:
            r = b.const(float(dag.const[i]))
        else:
            r = b._new(k, [go(c) for c in dag.children(i)])
        memo[i] = r
        return r

    go(root)
    return b.finish()


# -- functional API -------------------------------------------------------


def smooth_robustness(dag: SoftDag, tau, params: SmoothingParams, backend: Optional[str] = None) -> float:
    return float(dag.value(as_states(tau), params.beta, backend)[0])


def smooth_gradient(dag: SoftDag, tau, params: SmoothingParams, backend: Optional[str] = None) -> np.ndarray:
    """Gradient of the smoothed robustness, flattened state-major (T*n,)."""
    _, g = dag.value_and_grad(as_states(tau), params.beta, backend)
    return g[0].reshape(-1)


def hard_robustness(dag: SoftDag, tau) -> float:
    """The DAG evaluated with exact max/min."""
    return float(dag.value(as_states(tau), None)[0])


def exact_subgradient(dag: SoftDag, tau) -> np.ndarray:
    """Gradient through the active path, first-encountered child on ties; flattened."""
    _, g = dag.value_and_grad(as_states(tau), None)
    return g[0].reshape(-1)


def error_bound(dag: SoftDag, params: SmoothingParams) -> Tuple[float, float]:
    return dag.error_bound(params.beta)
