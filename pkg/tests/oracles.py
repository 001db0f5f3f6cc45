"""Independent reference implementations and random-instance generators shared by the tests.

The brute-force evaluator below follows the recursive definition literally:
every temporal operator enumerates its time indices explicitly, and Until /
Then evaluate their left operand on the truncated window [t'', t'). Nothing
here calls into the package's evaluator.
"""
import math
from pathlib import Path

import numpy as np
from hypothesis import strategies as st

from tlps.tltl import (
    RHO_MAX,
    Affine,
    Always,
    And,
    Distance,
    Eventually,
    Implies,
    Next,
    Not,
    Or,
    Pred,
    Then,
    TrueF,
    Until,
)

NODE_KINDS = ("True", "Pred", "Not", "And", "Or", "Implies", "F", "G", "X", "U", "T")

# Example-1 smoothed robustness at beta = 9, from 50-digit mpmath evaluation of
# the nested log-sum-exp (soft max over t of soft min(s_t - 5, 10 - s_t)).
EXAMPLE1_SMOOTH_BETA9 = 2.0000000016922199587453184943066714465328976035729


def _margin(p, s):
    if isinstance(p.fn, Affine):
        f = 0.0
        for i, wi in enumerate(p.fn.w):
            f = f + wi * float(s[i])
        f = f + p.fn.b
    else:
        di = float(s[p.fn.i]) - p.fn.ci
        dj = float(s[p.fn.j]) - p.fn.cj
        f = math.sqrt(di * di + dj * dj)
    return f - p.c if p.op == ">" else p.c - f


def brute_rho(tau, phi, t=0, end=None, rho_max=RHO_MAX):
    """Robustness of phi on the window tau[t:end]."""
    end = len(tau) if end is None else end
    r = lambda f, a, e: brute_rho(tau, f, a, e, rho_max)  # noqa: E731
    if isinstance(phi, TrueF):
        return rho_max
    if isinstance(phi, Pred):
        return _margin(phi, tau[t])
    if isinstance(phi, Not):
        return -r(phi.arg, t, end)
    if isinstance(phi, And):
        return min(r(phi.left, t, end), r(phi.right, t, end))
    if isinstance(phi, Or):
        return max(r(phi.left, t, end), r(phi.right, t, end))
    if isinstance(phi, Implies):
        return max(-r(phi.left, t, end), r(phi.right, t, end))
    if isinstance(phi, Next):
        return r(phi.arg, t + 1, end) if t + 1 < end else -rho_max
    if isinstance(phi, Eventually):
        return max(r(phi.arg, tp, end) for tp in range(t, end))
    if isinstance(phi, Always):
        return min(r(phi.arg, tp, end) for tp in range(t, end))
    if isinstance(phi, Until):
        best = -math.inf
        for tp in range(t, end):
            inner = rho_max
            for tpp in range(t, tp):
                inner = min(inner, r(phi.left, tpp, tp))
            best = max(best, min(r(phi.right, tp, end), inner))
        return best
    if isinstance(phi, Then):
        best = -math.inf
        for tp in range(t, end):
            inner = -rho_max
            for tpp in range(t, tp):
                inner = max(inner, r(phi.left, tpp, tp))
            best = max(best, min(r(phi.right, tp, end), inner))
        return best
    raise TypeError(type(phi))


def brute_bool(tau, phi, t=0, end=None):
    end = len(tau) if end is None else end
    b = lambda f, a, e: brute_bool(tau, f, a, e)  # noqa: E731
    if isinstance(phi, TrueF):
        return True
    if isinstance(phi, Pred):
        return _margin(phi, tau[t]) > 0
    if isinstance(phi, Not):
        return not b(phi.arg, t, end)
    if isinstance(phi, And):
        return b(phi.left, t, end) and b(phi.right, t, end)
    if isinstance(phi, Or):
        return b(phi.left, t, end) or b(phi.right, t, end)
    if isinstance(phi, Implies):
        return (not b(phi.left, t, end)) or b(phi.right, t, end)
    if isinstance(phi, Next):
        return t + 1 < end and b(phi.arg, t + 1, end)
    if isinstance(phi, Eventually):
        return any(b(phi.arg, tp, end) for tp in range(t, end))
    if isinstance(phi, Always):
        return all(b(phi.arg, tp, end) for tp in range(t, end))
    if isinstance(phi, Until):
        return any(
            b(phi.right, tp, end) and all(b(phi.left, tpp, tp) for tpp in range(t, tp)) for tp in range(t, end)
        )
    if isinstance(phi, Then):
        return any(
            b(phi.right, tp, end) and any(b(phi.left, tpp, tp) for tpp in range(t, tp)) for tp in range(t, end)
        )
    raise TypeError(type(phi))


# -- random instances ------------------------------------------------------------


def random_pred(rng, n):
    op = ">" if rng.random() < 0.5 else "<"
    c = float(rng.integers(-3, 4))
    if n >= 2 and rng.random() < 0.25:
        return Pred(Distance(0, 1, float(rng.integers(-2, 3)), float(rng.integers(-2, 3))), op, abs(c) + 0.5)
    w = [0.0] * n
    w[int(rng.integers(n))] = float(rng.choice([-1.0, 1.0, 0.5, 2.0]))
    if n >= 2 and rng.random() < 0.3:
        w[int(rng.integers(n))] += 1.0
    return Pred(Affine(tuple(w), float(rng.integers(-1, 2))), op, c)


def random_formula(rng, depth, n, kinds=NODE_KINDS):
    """Random formula of depth at most ``depth`` over ``n`` state components."""
    if depth <= 1:
        return TrueF() if rng.random() < 0.08 else random_pred(rng, n)
    kind = kinds[int(rng.integers(len(kinds)))]
    sub = lambda: random_formula(rng, int(rng.integers(1, depth)), n, kinds)  # noqa: E731
    if kind == "True":
        return TrueF()
    if kind == "Pred":
        return random_pred(rng, n)
    unary = {"Not": Not, "F": Eventually, "G": Always, "X": Next}
    if kind in unary:
        return unary[kind](sub())
    binary = {"And": And, "Or": Or, "Implies": Implies, "U": Until, "T": Then}
    return binary[kind](sub(), sub())


def random_instance(rng, max_depth=4, max_T=8, max_n=2, integer=False):
    n = int(rng.integers(1, max_n + 1))
    T = int(rng.integers(1, max_T + 1))
    phi = random_formula(rng, int(rng.integers(1, max_depth + 1)), n)
    tau = rng.integers(-4, 5, size=(T, n)).astype(float) if integer else rng.normal(0, 2.5, size=(T, n))
    return phi, tau


# -- hypothesis strategies -------------------------------------------------------


def _pred_strategy(n):
    affine = st.builds(
        lambda w, b, op, c: Pred(Affine(tuple(w), b), op, c),
        st.lists(st.sampled_from([-2.0, -1.0, -0.5, 0.0, 0.25, 1.0, 3.0]), min_size=n, max_size=n),
        st.sampled_from([0.0, -1.5, 2.0]),
        st.sampled_from([">", "<"]),
        st.floats(-5, 5, allow_nan=False).map(lambda v: round(v, 3)),
    )
    if n < 2:
        return affine
    dist = st.builds(
        lambda ci, cj, op, r: Pred(Distance(0, 1, ci, cj), op, r),
        st.sampled_from([0.0, 2.5, -1.0]),
        st.sampled_from([0.0, 2.5, 1.25]),
        st.sampled_from([">", "<"]),
        st.sampled_from([0.5, 0.7, 2.0]),
    )
    return st.one_of(affine, dist)


def formulas(n=2, max_leaves=12):
    """Hypothesis strategy over all eleven node kinds."""
    leaf = st.one_of(st.just(TrueF()), _pred_strategy(n))

    def extend(children):
        return st.one_of(
            st.builds(Not, children),
            st.builds(Eventually, children),
            st.builds(Always, children),
            st.builds(Next, children),
            st.builds(And, children, children),
            st.builds(Or, children, children),
            st.builds(Implies, children, children),
            st.builds(Until, children, children),
            st.builds(Then, children, children),
        )

    return st.recursive(leaf, extend, max_leaves=max_leaves)


def trajectories(n=2, max_T=8):
    return st.integers(1, max_T).flatmap(
        lambda T: st.lists(
            st.lists(st.floats(-6, 6, allow_nan=False, allow_infinity=False), min_size=n, max_size=n),
            min_size=T,
            max_size=T,
        ).map(lambda rows: np.array(rows, dtype=float))
    )


def depth(phi):
    ch = phi.children()
    return 1 + max((depth(c) for c in ch), default=0)


def kind_name(phi):
    return {
        TrueF: "True",
        Pred: "Pred",
        Not: "Not",
        And: "And",
        Or: "Or",
        Implies: "Implies",
        Eventually: "F",
        Always: "G",
        Next: "X",
        Until: "U",
        Then: "T",
    }[type(phi)]


def central_fd(f, x, h=1e-5):
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for k in range(flat.size):
        old = flat[k]
        flat[k] = old + h
        fp = f(x)
        flat[k] = old - h
        fm = f(x)
        flat[k] = old
        gf[k] = (fp - fm) / (2 * h)
    return g


def rel_error(a, b, floor=1e-8):
    a, b = np.ravel(a), np.ravel(b)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale < floor:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
