"""Boolean and quantitative (robustness) semantics of TLTL.

A formula is always evaluated on a window ``s[t:e]`` of the trajectory.
Temporal operators range over start indices ``t' in [t, e)``; the inner
quantifier of Until/Then looks at the window ``s[t'':t']`` that ends where the
outer witness begins. For each subformula we compute the whole signal
``rho(s[t:e], phi)`` for every ``t < e`` at once and memoize it per window end,
so Until/Then cost O(T^2) vector work.

Conventions where the definitions leave a gap:

* ``true`` has robustness ``RHO_MAX``.
* Next at the last index of its window is false, robustness ``-RHO_MAX``.
* The empty inner range of Until is vacuously true (``RHO_MAX``), the empty
  inner range of Then is false (``-RHO_MAX``).
"""
from __future__ import annotations

import numpy as np

from .ast import (
    RHO_MAX,
    Always,
    And,
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


def as_states(tau) -> np.ndarray:
    """Coerce a trajectory to a float (T, n) array; 1-D input means n = 1."""
    a = np.asarray(tau, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2 or a.shape[0] < 1:
        raise ValueError(f"trajectory must be a non-empty (T, n) array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("trajectory contains non-finite values")
    return a


def _rev_accumulate(ufunc, x: np.ndarray) -> np.ndarray:
    return ufunc.accumulate(x[::-1])[::-1] if len(x) else x


class _Signals:
    """Memoized per-window-end signals for one (trajectory, formula) pair."""

    def __init__(self, states: np.ndarray, rho_max: float, boolean: bool):
        self.states = states
        self.T = states.shape[0]
        self.rho_max = rho_max
        self.boolean = boolean
        self._cache = {}
        self._temporal = {}

    def temporal(self, phi: Formula) -> bool:
        key = id(phi)
        if key not in self._temporal:
            self._temporal[key] = (phi, is_temporal(phi))
        return self._temporal[key][1]

    def get(self, phi: Formula, e: int) -> np.ndarray:
        # window-independent subformulas are computed once on the full horizon
        if not self.temporal(phi):
            full = self._lookup(phi, self.T)
            return full[:e]
        return self._lookup(phi, e)

    def _lookup(self, phi, e):
        key = (id(phi), e)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._compute(phi, e)
            self._cache[key] = (phi, hit)
            return hit
        return hit[1]

    def _compute(self, phi: Formula, e: int) -> np.ndarray:
        top = True if self.boolean else self.rho_max
        bottom = False if self.boolean else -self.rho_max
        if self.boolean:
            lo, hi, neg = np.logical_and, np.logical_or, np.logical_not
        else:
            lo, hi, neg = np.minimum, np.maximum, np.negative

        if isinstance(phi, TrueF):
            return np.full(e, top)
        if isinstance(phi, Pred):
            s = self.states[:e]
            if self.boolean:
                f = phi.fn.values(s)
                return f < phi.c if phi.op == "<" else f > phi.c
            return phi.margins(s)
        if isinstance(phi, Not):
            return neg(self.get(phi.arg, e))
        if isinstance(phi, And):
            return lo(self.get(phi.left, e), self.get(phi.right, e))
        if isinstance(phi, Or):
            return hi(self.get(phi.left, e), self.get(phi.right, e))
        if isinstance(phi, Implies):
            return hi(neg(self.get(phi.left, e)), self.get(phi.right, e))
        if isinstance(phi, Next):
            out = np.full(e, bottom)
            if e > 1:
                out[:-1] = self.get(phi.arg, e)[1:]
            return out
        if isinstance(phi, Always):
            return _rev_accumulate(lo, self.get(phi.arg, e))
        if isinstance(phi, Eventually):
            return _rev_accumulate(hi, self.get(phi.arg, e))
        if isinstance(phi, (Until, Then)):
            # inner quantifier: forall (min) for Until, exists (max) for Then
            inner_op, empty = (lo, top) if isinstance(phi, Until) else (hi, bottom)
            psi = self.get(phi.right, e)
            out = np.full(e, bottom)
            for tp in range(e):
                # inner[t] = op over t'' in [t, tp) of phi on window [t'', tp)
                inner = np.append(_rev_accumulate(inner_op, self.get(phi.left, tp)), empty)
                term = lo(psi[tp], inner)
                out[: tp + 1] = hi(out[: tp + 1], term)
            return out
        raise TypeError(f"unknown formula node {phi!r}")


def _check_start(t: int, T: int) -> None:
    if not 0 <= t < T:
        raise IndexError(f"start index {t} outside [0, {T})")


def robustness(tau, phi: Formula, t: int = 0, rho_max: float = RHO_MAX) -> float:
    """Robustness degree of ``phi`` on the suffix ``tau[t:]``."""
    s = as_states(tau)
    _check_start(t, s.shape[0])
    return float(_Signals(s, rho_max, boolean=False).get(phi, s.shape[0])[t])


def robustness_signal(tau, phi: Formula, rho_max: float = RHO_MAX) -> np.ndarray:
    """Robustness of every suffix ``tau[t:]``, t = 0..T-1."""
    s = as_states(tau)
    return _Signals(s, rho_max, boolean=False).get(phi, s.shape[0]).copy()


def eval_boolean(tau, phi: Formula, t: int = 0) -> bool:
    """Boolean satisfaction of ``phi`` on the suffix ``tau[t:]``."""
    s = as_states(tau)
    _check_start(t, s.shape[0])
    return bool(_Signals(s, RHO_MAX, boolean=True).get(phi, s.shape[0])[t])


def batch_robustness(states: np.ndarray, phi: Formula, rho_max: float = RHO_MAX) -> np.ndarray:
    """Robustness at t = 0 for each trajectory of a (B, T, n) batch."""
    return np.array([robustness(s, phi, 0, rho_max) for s in np.asarray(states, dtype=float)])
