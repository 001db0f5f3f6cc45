"""Temporal logic policy search.

One iteration: roll out N trajectories under the current policy, push each one
uphill on the smoothed robustness inside a Euclidean trust region, fit a
per-step Gaussian to the pushed trajectories, weight the *original* samples
by their log-density under that Gaussian, and refit the policy feed-forward
terms by weighted maximum likelihood.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .env import Environment, Vehicle, heading_feedback, rng_streams, rollout
from .policy import COV_FLOOR, Policy, SampleBatch, wml_update
from .smoothing import SmoothingParams, SoftDag, build_dag
from .tltl import Formula, RHO_MAX, robustness
from .tltl.ast import max_component, read_components

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    N: int = 20
    T: int = 50
    epsilon: float = 1.0
    alpha: float = 0.1
    beta: float = 9.0
    iterations: int = 40
    max_ascent_steps: int = 20
    step_size: float = 0.5
    seed: int = 0
    ridge: float = 1e-6
    cov_floor: float = COV_FLOOR
    init_mean: Tuple[float, ...] = ()
    init_mean_std: float = float(np.sqrt(0.1))
    init_cov: float = 0.5
    rho_max: float = RHO_MAX
    # "read": fit and score the trajectory density on the state components the
    # formula reads; "all": on the full state
    density_components: str = "read"
    # fixed feedback gains: "none" (K = 0) or "heading" (track the heading of
    # the nominal rollout under init_mean, see env.heading_feedback)
    feedback: str = "none"
    feedback_gain: float = 1.0

    def __post_init__(self):
        checks = [
            (self.N >= 2, f"N must be >= 2 (got {self.N})"),
            (self.T >= 1, f"T must be >= 1 (got {self.T})"),
            (self.epsilon > 0, f"epsilon must be > 0 (got {self.epsilon})"),
            (self.alpha > 0, f"alpha must be > 0 (got {self.alpha})"),
            (np.isfinite(self.beta) and self.beta > 0, f"beta must be > 0 (got {self.beta})"),
            (self.iterations >= 0, f"iterations must be >= 0 (got {self.iterations})"),
            (self.max_ascent_steps >= 0, "max_ascent_steps must be >= 0"),
            (self.step_size > 0, "step_size must be > 0"),
            (self.ridge > 0, "ridge must be > 0"),
            (self.cov_floor > 0, "cov_floor must be > 0"),
            (self.init_cov > 0, "init_cov must be > 0"),
            (self.init_mean_std >= 0, "init_mean_std must be >= 0"),
            (self.density_components in ("read", "all"), "density_components must be 'read' or 'all'"),
            (self.feedback in ("none", "heading"), "feedback must be 'none' or 'heading'"),
            (np.isfinite(self.feedback_gain) and self.feedback_gain >= 0, "feedback_gain must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        object.__setattr__(self, "init_mean", tuple(float(v) for v in self.init_mean))


@dataclass(frozen=True)
class TrajectoryDistribution:
    mu: np.ndarray  # (T, n)
    sigma: np.ndarray  # (T, n, n)

    def log_density(self, states) -> np.ndarray:
        """sum_t log N(s_t | mu_t, Sigma_t) for each trajectory of a (B, T, n) batch."""
        s = np.asarray(states, dtype=float)
        d = s - self.mu  # (B, T, n)
        n = d.shape[-1]
        L = np.linalg.cholesky(self.sigma)  # (T, n, n)
        # solve L z = d per step; (T, n, B)
        z = np.linalg.solve(L, np.transpose(d, (1, 2, 0)))
        maha = np.einsum("tnb,tnb->bt", z, z)
        logdet = 2.0 * np.log(np.diagonal(L, axis1=1, axis2=2)).sum(axis=1)  # (T,)
        return -0.5 * (maha + logdet + n * np.log(2 * np.pi)).sum(axis=1)


@dataclass
class IterationReport:
    iteration: int
    mean_rho: float
    max_rho: float
    min_rho: float
    mean_rho_smooth: float
    frac_satisfied: float
    wall_ms: float
    # trust-region instrumentation
    max_step_sq: float = 0.0
    min_gain: float = 0.0
    warnings: List[str] = field(default_factory=list)

    CSV_COLUMNS = ("iteration", "mean_rho", "max_rho", "min_rho", "mean_rho_smooth", "frac_satisfied", "wall_ms")


# -- trajectory improvement -------------------------------------------------


@dataclass
class ImproveResult:
    states: np.ndarray  # (B, T, n)
    before: np.ndarray  # smoothed robustness of the inputs
    after: np.ndarray
    step_sq: np.ndarray  # squared distance moved


def _project(x, center, eps):
    d = x - center
    nrm2 = np.einsum("btn,btn->b", d, d)
    scale = np.where(nrm2 > eps, np.sqrt(eps / np.where(nrm2 > 0, nrm2, 1.0)), 1.0)
    return center + d * scale[:, None, None]


def improve_trajectories(
    states,
    dag: SoftDag,
    params: SmoothingParams,
    epsilon: float,
    max_steps: int = 20,
    step_size: float = 0.5,
    grad_tol: float = 1e-8,
    max_backtracks: int = 30,
    backend: Optional[str] = None,
) -> ImproveResult:
    """Projected gradient ascent on the smoothed robustness inside ||x - tau||^2 <= epsilon.

    Each trajectory of the batch keeps its own step size. A step is taken only
    if it passes an Armijo test, so the smoothed robustness never decreases.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    tau = np.array(states, dtype=float)
    if tau.ndim == 2:
        tau = tau[None]
    beta = params.beta
    x = tau.copy()
    f, g = dag.value_and_grad(x, beta, backend)
    before = f.copy()
    eta = np.full(len(x), float(step_size))
    gnorm = np.sqrt(np.einsum("btn,btn->b", g, g))
    active = gnorm >= grad_tol

    for _ in range(max_steps):
        if not active.any():
            break
        pending = active.copy()
        moved = np.zeros(len(x), dtype=bool)
        for _ in range(max_backtracks):
            idx = np.flatnonzero(pending)
            if len(idx) == 0:
                break
            cand = _project(x[idx] + eta[idx, None, None] * g[idx], tau[idx], epsilon)
            fc = dag.value(cand, beta, backend)
            slope = np.einsum("btn,btn->b", g[idx], cand - x[idx])
            ok = (fc >= f[idx] + 1e-4 * slope) & (fc >= f[idx])
            acc = idx[ok]
            step = cand[ok] - x[acc]
            moved[acc] = np.einsum("btn,btn->b", step, step) > 1e-24
            x[acc] = cand[ok]
            f[acc] = fc[ok]
            pending[acc] = False
            eta[idx[~ok]] *= 0.5
        # no acceptable step, or pinned on the trust-region boundary
        active &= moved
        eta[moved] *= 2.0
        if active.any():
            idx = np.flatnonzero(active)
            fi, gi = dag.value_and_grad(x[idx], beta, backend)
            f[idx] = fi
            g[idx] = gi
            gn = np.sqrt(np.einsum("btn,btn->b", gi, gi))
            active[idx[gn < grad_tol]] = False

    d = x - tau
    return ImproveResult(x, before, f, np.einsum("btn,btn->b", d, d))


def improve_trajectory(tau, dag, params, epsilon, **opts) -> np.ndarray:
    """Single-trajectory form of :func:`improve_trajectories`."""
    return improve_trajectories(np.asarray(tau, dtype=float)[None], dag, params, epsilon, **opts).states[0]


# -- distribution fit and weights -------------------------------------------


def fit_distribution(improved, reg: float = 1e-6) -> TrajectoryDistribution:
    """Per-step mean and population covariance (divide by N) plus ``reg * I``."""
    X = np.asarray(improved, dtype=float)
    if X.ndim != 3 or X.shape[0] < 2:
        raise ValueError("need a (N >= 2, T, n) batch")
    mu = X.mean(axis=0)
    d = X - mu
    sigma = np.einsum("itm,itn->tmn", d, d) / X.shape[0]
    sigma += reg * np.eye(X.shape[2])
    return TrajectoryDistribution(mu, sigma)


def softmax_weights(samples, dist: TrajectoryDistribution, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """w_i proportional to exp(alpha * (l_i - max l)), l_i the log-density of sample i."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    logp = dist.log_density(samples)
    return softmax(alpha * logp), logp


def softmax(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


# -- training loop -----------------------------------------------------------


def sample_batch(env: Environment, policy: Policy, N: int, seed: int, iteration: int) -> SampleBatch:
    rngs = rng_streams(seed, 1, iteration, n=N)
    T = policy.horizon
    runs = [rollout(env, policy.sample_action, T, rng) for rng in rngs]
    return SampleBatch(
        np.stack([r[0] for r in runs]), np.stack([r[1] for r in runs]), seed_path=(seed, 1, iteration)
    )


def initial_policy(cfg: TrainConfig, env: Environment) -> Policy:
    rng = rng_streams(cfg.seed, 0, n=1)[0]
    mean = cfg.init_mean or None
    if mean is not None and len(mean) != env.action_dim:
        raise ConfigError(f"init_mean needs {env.action_dim} entries, got {len(mean)}")
    K = None
    if cfg.feedback == "heading":
        if not isinstance(env, Vehicle) or mean is None:
            raise ConfigError("feedback = heading needs the vehicle environment and init_mean")
        K = heading_feedback(env.cfg, cfg.T, mean, cfg.feedback_gain)
    return Policy.initial(cfg.T, env.state_dim, env.action_dim, rng, mean, cfg.init_mean_std, cfg.init_cov, K)


def train(
    cfg: TrainConfig,
    env: Environment,
    phi: Formula,
    callback: Optional[Callable] = None,
    policy: Optional[Policy] = None,
    backend: Optional[str] = None,
) -> Tuple[Policy, List[IterationReport]]:
    """Run ``cfg.iterations`` TLPS updates.

    ``callback(report, batch, improved)`` is invoked after every iteration,
    where ``improved`` is the :class:`ImproveResult` of that iteration.
    """
    if cfg.T != env.horizon:
        raise ConfigError(f"T = {cfg.T} differs from the environment horizon {env.horizon}")
    if max_component(phi) > env.state_dim:
        raise ConfigError(f"formula reads {max_component(phi)} state components, environment has {env.state_dim}")
    if policy is None:
        policy = initial_policy(cfg, env)
    reports: List[IterationReport] = []
    if cfg.iterations == 0:
        return policy, reports

    dag = build_dag(phi, cfg.T, cfg.rho_max)
    cols = list(read_components(phi)) if cfg.density_components == "read" else []
    cols = cols or slice(None)
    params = SmoothingParams(cfg.beta, cfg.rho_max)
    drops = 0
    prev_smooth = None
    for it in range(cfg.iterations):
        t0 = time.perf_counter()
        batch = sample_batch(env, policy, cfg.N, cfg.seed, it)
        rho = np.array([robustness(s, phi, 0, cfg.rho_max) for s in batch.states])
        imp = improve_trajectories(
            batch.states, dag, params, cfg.epsilon, cfg.max_ascent_steps, cfg.step_size, backend=backend
        )
        dist = fit_distribution(imp.states[..., cols], cfg.ridge)
        w, _ = softmax_weights(batch.states[..., cols], dist, cfg.alpha)
        policy = wml_update(policy, batch, w, cfg.cov_floor)

        notes = []
        smooth_mean = float(imp.before.mean())
        if prev_smooth is not None and smooth_mean < prev_smooth:
            drops += 1
            if drops >= 2:
                notes.append("mean smoothed robustness dropped two iterations in a row")
                log.warning("iteration %d: %s", it, notes[-1])
        else:
            drops = 0
        prev_smooth = smooth_mean

        report = IterationReport(
            iteration=it,
            mean_rho=float(rho.mean()),
            max_rho=float(rho.max()),
            min_rho=float(rho.min()),
            mean_rho_smooth=smooth_mean,
            frac_satisfied=float(np.mean(rho > 0)),
            wall_ms=(time.perf_counter() - t0) * 1e3,
            max_step_sq=float(imp.step_sq.max()),
            min_gain=float((imp.after - imp.before).min()),
            warnings=notes,
        )
        reports.append(report)
        log.info(
            "iter %3d  mean rho %+.4f  sat %.2f  mean smooth %+.4f",
            it,
            report.mean_rho,
            report.frac_satisfied,
            report.mean_rho_smooth,
        )
        if callback is not None:
            callback(report, batch, imp)
    return policy, reports


# -- learning-curve CSV -------------------------------------------------------


def write_learning_curve(path, reports: List[IterationReport], wall_clock: bool = True) -> None:
    """``wall_clock=False`` writes 0 for wall_ms so reruns are byte-identical."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IterationReport.CSV_COLUMNS)
        for r in reports:
            row = asdict(r)
            row["wall_ms"] = round(r.wall_ms, 3) if wall_clock else 0
            w.writerow([row[c] if c == "iteration" else repr(float(row[c])) for c in IterationReport.CSV_COLUMNS])


def read_learning_curve(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != IterationReport.CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {rd.fieldnames}")
        return [{k: int(v) if k == "iteration" else float(v) for k, v in row.items()} for row in rd]
