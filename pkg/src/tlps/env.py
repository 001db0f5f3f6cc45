"""Finite-horizon environments: the interface, rollouts, and the noisy
kinematic bicycle used by the navigation tasks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Sequence, Tuple

import numpy as np

STATE_NAMES = ("x", "y", "theta", "xdot", "ydot", "thetadot")


class Environment:
    """Finite-horizon MDP: an initial-state density and a transition density."""

    state_dim: int
    action_dim: int
    horizon: int

    def initial_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def step(self, state: np.ndarray, action: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


def wrap_angle(a):
    """Map to (-pi, pi]."""
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


@dataclass(frozen=True)
class Rect:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def __post_init__(self):
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValueError(f"degenerate goal rectangle {self}")


@dataclass(frozen=True)
class VehicleConfig:
    L: float = 1.0
    dt: float = 0.1
    horizon: int = 50
    noise_sigma: Tuple[float, ...] = (0.01, 0.01, 0.005, 0.0, 0.0, 0.0)
    init_mean: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    init_sigma: Tuple[float, ...] = (0.05, 0.05, 0.02, 0.0, 0.0, 0.0)
    goals: Tuple[Rect, ...] = (Rect(4.0, 5.0, 4.0, 5.0),)
    obstacle_center: Tuple[float, float] = (2.5, 2.5)
    obstacle_radius: float = 0.7
    max_speed: float = 2.0
    max_steer: float = 1.2

    def __post_init__(self):
        for name in ("noise_sigma", "init_mean", "init_sigma"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 6:
                raise ValueError(f"{name} needs 6 entries, got {len(v)}")
            object.__setattr__(self, name, v)
        object.__setattr__(self, "goals", tuple(g if isinstance(g, Rect) else Rect(*g) for g in self.goals))
        if self.L <= 0 or self.dt <= 0:
            raise ValueError("L and dt must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if self.obstacle_radius <= 0:
            raise ValueError("obstacle radius must be positive")
        if self.max_speed <= 0 or not 0 < self.max_steer < math.pi / 2:
            raise ValueError("action bounds need max_speed > 0 and 0 < max_steer < pi/2")
        if any(s < 0 for s in self.noise_sigma + self.init_sigma):
            raise ValueError("standard deviations must be non-negative")


class Vehicle(Environment):
    """Kinematic bicycle; state (x, y, theta, xdot, ydot, thetadot), action (speed, steer)."""

    state_dim = 6
    action_dim = 2

    def __init__(self, cfg: VehicleConfig = VehicleConfig()):
        self.cfg = cfg
        self.horizon = cfg.horizon
        self._noise = np.asarray(cfg.noise_sigma)
        self._init_mean = np.asarray(cfg.init_mean)
        self._init_sigma = np.asarray(cfg.init_sigma)

    def initial_state(self, rng):
        s = self._init_mean + self._init_sigma * rng.standard_normal(6)
        s[2] = wrap_angle(s[2])
        return s

    def step(self, state, action, rng):
        return vehicle_step(state, action, rng, self.cfg, self._noise)


def vehicle_step(state, action, rng, cfg: VehicleConfig, noise=None) -> np.ndarray:
    """One Euler step of the bicycle model followed by additive Gaussian noise.

    ``rng=None`` (or zero sigmas) gives the noise-free map.
    """
    c = cfg
    a_v = min(max(float(action[0]), -c.max_speed), c.max_speed)
    a_phi = min(max(float(action[1]), -c.max_steer), c.max_steer)
    x, y, th = float(state[0]), float(state[1]), float(state[2])
    xd = a_v * math.cos(th)
    yd = a_v * math.sin(th)
    thd = a_v / c.L * math.tan(a_phi)
    out = np.array([x + c.dt * xd, y + c.dt * yd, th + c.dt * thd, xd, yd, thd])
    if rng is not None:
        sigma = np.asarray(c.noise_sigma) if noise is None else noise
        if np.any(sigma):
            out = out + sigma * rng.standard_normal(6)
    out[2] = wrap_angle(out[2])
    return out


def heading_feedback(cfg: VehicleConfig, T: int, action, gain: float) -> np.ndarray:
    """Fixed gains K (T, 2, 6) that steer toward the heading of a nominal rollout.

    The nominal rollout applies the constant ``action`` from ``cfg.init_mean``
    without noise. The steering row reads (xdot, ydot), which hold the velocity
    of the last step, so K_t s = gain * sin(h_t - h) for a state moving with
    heading h at the nominal speed, where h_t is the nominal heading. K_t s = 0
    on the nominal rollout, and the angle wrap never enters.
    """
    K = np.zeros((T, 2, 6))
    s = np.array(cfg.init_mean, dtype=float)
    for t in range(T):
        v2 = s[3] * s[3] + s[4] * s[4]
        if v2 > 0:
            K[t, 1, 3] = gain * s[4] / v2
            K[t, 1, 4] = -gain * s[3] / v2
        s = vehicle_step(s, action, None, cfg)
    return K


def rollout(
    env: Environment,
    sampler: Callable[[np.ndarray, int, np.random.Generator], np.ndarray],
    T: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw s_0, then alternate action sample and transition.

    Returns states (T, n) and the T-1 actions that produced s_1..s_{T-1}.
    """
    if T != env.horizon:
        raise ValueError(f"rollout horizon {T} differs from environment horizon {env.horizon}")
    states = np.empty((T, env.state_dim))
    actions = np.empty((T - 1, env.action_dim))
    s = env.initial_state(rng)
    states[0] = s
    for t in range(T - 1):
        a = np.asarray(sampler(s, t, rng), dtype=float)
        actions[t] = a
        s = env.step(s, a, rng)
        states[t + 1] = s
    return states, actions


def rng_streams(seed: int, *path: int, n: int) -> List[np.random.Generator]:
    """``n`` independent generators derived deterministically from a root seed and a path."""
    ss = np.random.SeedSequence([int(seed), *[int(p) for p in path]])
    return [np.random.default_rng(c) for c in ss.spawn(n)]


def goal_formula_text(g: Rect, xname="x", yname="y") -> str:
    return f"({xname} > {g.x_lo!r} & {xname} < {g.x_hi!r} & {yname} > {g.y_lo!r} & {yname} < {g.y_hi!r})"


def state_var_decls(names: Sequence[str] = STATE_NAMES) -> str:
    return "".join(f"var {n} : {i};\n" for i, n in enumerate(names))
