"""Forward/backward sweeps over a compiled soft-robustness DAG.

Node layout (shared by both backends): nodes are numbered children-first, so a
single increasing pass is a valid forward order. ``kind`` holds LEAF, CONST,
MAX or MIN; children of node ``i`` are ``child[ptr[i]:ptr[i+1]]``. Values and
adjoints are (n_nodes, B) arrays so a batch of trajectories shares one pass.

A MIN node is evaluated as ``-max(-x)``; every soft node is stabilized by
shifting with its extremal child before exponentiation.
"""
import numpy as np

from .._accel import njit

LEAF, CONST, MAX, MIN = 0, 1, 2, 3


@njit
def _forward_numba(kind, ptr, child, values, beta, hard):
    # batch axis innermost: rows of ``values`` are contiguous
    n, B = values.shape
    m = np.empty(B)
    acc = np.empty(B)
    for i in range(n):
        k = kind[i]
        if k < 2:
            continue
        sgn = 1.0 if k == MAX else -1.0
        lo, hi = ptr[i], ptr[i + 1]
        c = child[lo]
        for b in range(B):
            m[b] = sgn * values[c, b]
        for e in range(lo + 1, hi):
            c = child[e]
            for b in range(B):
                x = sgn * values[c, b]
                if x > m[b]:
                    m[b] = x
        if hard:
            for b in range(B):
                values[i, b] = sgn * m[b]
        else:
            acc[:] = 0.0
            for e in range(lo, hi):
                c = child[e]
                for b in range(B):
                    acc[b] += np.exp(beta * (sgn * values[c, b] - m[b]))
            for b in range(B):
                values[i, b] = sgn * (m[b] + np.log(acc[b]) / beta)


@njit
def _backward_numba(kind, ptr, child, values, adj, beta, hard):
    n, B = values.shape
    done = np.empty(B, dtype=np.bool_)
    for i in range(n - 1, -1, -1):
        k = kind[i]
        if k < 2:
            continue
        nz = False
        for b in range(B):
            if adj[i, b] != 0.0:
                nz = True
                break
        if not nz:
            continue
        sgn = 1.0 if k == MAX else -1.0
        lo, hi = ptr[i], ptr[i + 1]
        if hard:
            # first child attaining the extremum takes the whole adjoint
            done[:] = False
            for e in range(lo, hi):
                c = child[e]
                for b in range(B):
                    if not done[b] and values[c, b] == values[i, b]:
                        adj[c, b] += adj[i, b]
                        done[b] = True
        else:
            for e in range(lo, hi):
                c = child[e]
                for b in range(B):
                    adj[c, b] += adj[i, b] * np.exp(sgn * beta * (values[c, b] - values[i, b]))


def _forward_numpy(levels, values, beta, hard):
    for lv in levels:
        X = values[lv.flat] * lv.sgn_edge[:, None]
        m = np.maximum.reduceat(X, lv.starts, axis=0)
        if hard:
            v = m
        else:
            E = np.exp(beta * (X - m[lv.seg]))
            v = m + np.log(np.add.reduceat(E, lv.starts, axis=0)) / beta
        values[lv.nodes] = v * lv.sgn_node[:, None]


def _backward_numpy(levels, values, adj, beta, hard):
    for lv in reversed(levels):
        a = adj[lv.nodes]
        if not np.any(a):
            continue
        x = values[lv.flat]
        v = values[lv.nodes][lv.seg]
        if hard:
            eq = x == v
            cnt = np.cumsum(eq, axis=0)
            before = (cnt - eq)[lv.starts]
            w = eq & (cnt - before[lv.seg] == 1)
        else:
            w = np.exp(lv.sgn_edge[:, None] * beta * (x - v))
        np.add.at(adj, lv.flat, a[lv.seg] * w)


def forward(dag, values, beta, hard, backend):
    if backend == "numba":
        _forward_numba(dag.kind, dag.ptr, dag.child, values, float(beta), bool(hard))
    else:
        _forward_numpy(dag.levels, values, beta, hard)


def backward(dag, values, adj, beta, hard, backend):
    if backend == "numba":
        _backward_numba(dag.kind, dag.ptr, dag.child, values, adj, float(beta), bool(hard))
    else:
        _backward_numpy(dag.levels, values, adj, beta, hard)
