"""Time-varying linear-Gaussian policy  a_t ~ N(K_t s_t + k_t, C_t)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

COV_FLOOR = 1e-4


@dataclass(frozen=True)
class SampleBatch:
    """N rollouts under one policy: states (N, T, n), actions (N, T-1, m)."""

    states: np.ndarray
    actions: np.ndarray
    seed_path: tuple = ()

    def __post_init__(self):
        s = np.asarray(self.states, dtype=float)
        a = np.asarray(self.actions, dtype=float)
        if s.ndim != 3 or a.ndim != 3 or s.shape[0] != a.shape[0] or a.shape[1] != s.shape[1] - 1:
            raise ValueError(f"incompatible batch shapes states{s.shape} actions{a.shape}")
        object.__setattr__(self, "states", s)
        object.__setattr__(self, "actions", a)

    def __len__(self):
        return self.states.shape[0]


@dataclass(frozen=True, eq=False)
class Policy:
    K: np.ndarray  # (T, m, n) feedback gains, never updated
    k: np.ndarray  # (T, m) feed-forward
    C: np.ndarray  # (T, m, m) covariance

    def __post_init__(self):
        K, k, C = (np.array(a, dtype=float) for a in (self.K, self.k, self.C))
        T, m = k.shape
        if K.shape[:2] != (T, m) or C.shape != (T, m, m):
            raise ValueError(f"inconsistent shapes K{K.shape} k{k.shape} C{C.shape}")
        for a in (K, k, C):
            a.setflags(write=False)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "_chol", None)

    @property
    def horizon(self) -> int:
        return self.k.shape[0]

    @property
    def action_dim(self) -> int:
        return self.k.shape[1]

    @property
    def state_dim(self) -> int:
        return self.K.shape[2]

    @property
    def chol(self) -> np.ndarray:
        if self._chol is None:
            # LinAlgError here means a covariance lost positive definiteness
            object.__setattr__(self, "_chol", np.linalg.cholesky(self.C))
        return self._chol

    @classmethod
    def initial(
        cls,
        T: int,
        state_dim: int,
        action_dim: int,
        rng: np.random.Generator,
        mean=None,
        mean_std: float = np.sqrt(0.1),
        cov: float = 0.5,
        K: Optional[np.ndarray] = None,
    ) -> "Policy":
        """Feed-forward terms drawn around ``mean``, covariance ``cov * I``, K = 0 unless given."""
        mu = np.zeros(action_dim) if mean is None else np.asarray(mean, dtype=float)
        k = mu + mean_std * rng.standard_normal((T, action_dim))
        C = np.broadcast_to(cov * np.eye(action_dim), (T, action_dim, action_dim))
        if K is None:
            K = np.zeros((T, action_dim, state_dim))
        return cls(np.broadcast_to(K, (T, action_dim, state_dim)), k, C)

    def mean_action(self, state, t: int) -> np.ndarray:
        return self.K[t] @ np.asarray(state, dtype=float) + self.k[t]

    def sample_action(self, state, t: int, rng: np.random.Generator) -> np.ndarray:
        if not 0 <= t < self.horizon:
            raise IndexError(f"time step {t} outside [0, {self.horizon})")
        z = rng.standard_normal(self.action_dim)
        return self.mean_action(state, t) + self.chol[t] @ z

    __call__ = sample_action


def effective_feedforward(policy: Policy, states, actions, t=None) -> np.ndarray:
    """k_t^i = a_t^i - K_t s_t^i, the feed-forward that reproduces a sampled action.

    Accepts one trajectory ``states (T, n)``/``actions (T-1, m)`` or batches with
    a leading sample axis. With ``t`` given only that step is returned.
    """
    s = np.asarray(states, dtype=float)
    a = np.asarray(actions, dtype=float)
    if t is not None:
        return a[..., t, :] - np.einsum("mn,...n->...m", policy.K[t], s[..., t, :])
    steps = a.shape[-2]
    return a - np.einsum("tmn,...tn->...tm", policy.K[:steps], s[..., :steps, :])


def wml_update(policy: Policy, batch: SampleBatch, weights, cov_floor: float = COV_FLOOR) -> Policy:
    """Weighted maximum-likelihood refit of k_t and C_t; K_t is left as is.

    Steps with no recorded action (the last one) keep their parameters.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be a finite non-negative vector")
    total = w.sum()
    if total <= 0:
        raise ValueError("weights are all zero")
    w = w / total
    kk = effective_feedforward(policy, batch.states, batch.actions)  # (N, S, m)
    if kk.shape[0] != len(w):
        raise ValueError(f"{len(w)} weights for {kk.shape[0]} samples")
    steps, m = kk.shape[1], kk.shape[2]
    k_new = np.einsum("i,itm->tm", w, kk)
    d = kk - k_new
    C_new = np.einsum("i,itm,itn->tmn", w, d, d)
    C_new = 0.5 * (C_new + np.swapaxes(C_new, 1, 2)) + cov_floor * np.eye(m)
    k = policy.k.copy()
    C = policy.C.copy()
    k[:steps] = k_new
    C[:steps] = C_new
    return Policy(policy.K, k, C)


# -- text checkpoint --------------------------------------------------------


def save_policy(policy: Policy, path) -> None:
    """One line per step: ``T m n`` header, then K row-major, k, C row-major."""
    T, m, n = policy.horizon, policy.action_dim, policy.state_dim
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{T} {m} {n}\n")
        for t in range(T):
            vals = np.concatenate([policy.K[t].ravel(), policy.k[t], policy.C[t].ravel()])
            fh.write(" ".join(repr(float(v)) for v in vals) + "\n")


def load_policy(path) -> Policy:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    T, m, n = (int(v) for v in lines[0])
    rows = np.array([[float(v) for v in ln] for ln in lines[1:]])
    if rows.shape != (T, m * n + m + m * m):
        raise ValueError(f"{path}: expected {T} rows of {m * n + m + m * m} values, got {rows.shape}")
    K = rows[:, : m * n].reshape(T, m, n)
    k = rows[:, m * n : m * n + m]
    C = rows[:, m * n + m :].reshape(T, m, m)
    return Policy(K, k, C)
