import dataclasses
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlps.env import Vehicle, VehicleConfig, state_var_decls
from tlps.search import (
    ConfigError,
    IterationReport,
    TrainConfig,
    TrajectoryDistribution,
    fit_distribution,
    improve_trajectories,
    improve_trajectory,
    read_learning_curve,
    softmax,
    softmax_weights,
    train,
    write_learning_curve,
)
from tlps.smoothing import SmoothingParams, build_dag
from tlps.tltl import VariableMap, parse, parse_spec, robustness

S = VariableMap.from_names(["s"])
P9 = SmoothingParams(9.0)


def test_affine_objective_full_step():
    dag = build_dag(parse("F(s > 5)", S), 1)
    out = improve_trajectory(np.array([[0.0]]), dag, P9, 4.0)
    assert out[0, 0] == pytest.approx(2.0, abs=1e-9)
    # grid search over the ball agrees
    grid = np.linspace(-2, 2, 4001)
    best = grid[np.argmax([dag.value(np.array([[g]]), 9.0)[0] for g in grid])]
    assert best == pytest.approx(out[0, 0], abs=1e-3)


def test_tiny_trust_region_returns_input():
    dag = build_dag(parse("F(s > 5)", S), 3)
    tau = np.array([[0.0], [1.0], [2.0]])
    out = improve_trajectory(tau, dag, P9, 1e-300)
    assert np.allclose(out, tau, atol=1e-140)


def test_stationary_point_unchanged():
    # the band's soft-min is maximized at the midpoint
    dag = build_dag(parse("s > 0 & s < 2", S), 1)
    tau = np.array([[1.0]])
    assert np.array_equal(improve_trajectory(tau, dag, P9, 1.0), tau)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([0.01, 0.5, 4.0]))
def test_trust_region_and_monotone(seed, eps):
    rng = np.random.default_rng(seed)
    _, phi = parse_spec("var x : 0; var y : 1; F(x > 1 & y < 0) & G(dist(x, y; 0, 0) > 0.5)")
    dag = build_dag(phi, 6)
    X = rng.normal(size=(5, 6, 2))
    res = improve_trajectories(X, dag, P9, eps, 20, 0.5)
    assert np.all(np.sum((res.states - X) ** 2, axis=(1, 2)) <= eps + 1e-9)
    assert np.all(res.after >= res.before)
    assert np.allclose(res.after, dag.value(res.states, 9.0))


def test_fit_identical_and_two_point():
    X = np.tile(np.array([[1.0, 2.0], [3.0, 4.0]]), (4, 1, 1))
    d = fit_distribution(X, 1e-6)
    assert np.array_equal(d.mu, X[0])
    assert np.allclose(d.sigma, 1e-6 * np.eye(2))
    d = fit_distribution(np.array([[[0.0]], [[2.0]]]), 1e-6)
    assert d.mu[0, 0] == 1.0 and d.sigma[0, 0, 0] == pytest.approx(1.0 + 1e-6)


def test_fit_direct_summation():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(5, 4, 3))
    d = fit_distribution(X, 1e-6)
    for t in range(4):
        mu = sum(X[i, t] for i in range(5)) / 5
        sig = sum(np.outer(X[i, t] - mu, X[i, t] - mu) for i in range(5)) / 5 + 1e-6 * np.eye(3)
        assert np.allclose(d.mu[t], mu) and np.allclose(d.sigma[t], sig)


def test_log_density_matches_direct_gaussian():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(6, 3, 2))
    d = fit_distribution(X, 1e-3)
    lp = d.log_density(X)
    for i in range(6):
        tot = 0.0
        for t in range(3):
            S_ = d.sigma[t]
            r = X[i, t] - d.mu[t]
            tot += -0.5 * (r @ np.linalg.solve(S_, r) + np.log(np.linalg.det(S_)) + 2 * np.log(2 * np.pi))
        assert lp[i] == pytest.approx(tot, rel=1e-10)


def test_softmax_oracle():
    w = softmax(np.array([0.0, -1.0, -3.0]))
    e = np.exp([0.0, -1.0, -3.0])
    assert np.allclose(w, e / e.sum(), rtol=1e-14)


def test_softmax_weights_limits():
    X = np.zeros((4, 3, 2))
    d = TrajectoryDistribution(np.zeros((3, 2)), np.broadcast_to(np.eye(2), (3, 2, 2)))
    w, _ = softmax_weights(X, d, 1.0)
    assert np.allclose(w, 0.25)
    Y = np.random.default_rng(2).normal(size=(4, 3, 2))
    w, _ = softmax_weights(Y, d, 1e-12)
    assert np.allclose(w, 0.25)
    w, _ = softmax_weights(Y * 100, d, 5.0)
    assert np.all(np.isfinite(w)) and abs(w.sum() - 1.0) < 1e-12


def test_config_validation():
    with pytest.raises(ConfigError, match="N must be >= 2"):
        TrainConfig(N=1)
    with pytest.raises(ConfigError):
        TrainConfig(epsilon=0.0)
    with pytest.raises(ConfigError):
        TrainConfig(alpha=-1.0)
    with pytest.raises(ConfigError):
        TrainConfig(density_components="some")
    with pytest.raises(ConfigError):
        TrainConfig(feedback="lqr")


def _tiny():
    _, phi = parse_spec(state_var_decls() + "F(x > 0.5) & G(dist(x, y; 0.3, 0.3) > 0.1)")
    cfg = TrainConfig(N=4, T=10, iterations=2, seed=3, init_mean=(1.0, 0.0))
    return cfg, Vehicle(VehicleConfig(horizon=10)), phi


def test_heading_feedback_policy():
    cfg, env, phi = _tiny()
    pol, _ = train(dataclasses.replace(cfg, iterations=1, feedback="heading", feedback_gain=2.0), env, phi)
    assert pol.K[1:, 1, 3:5].any() and not pol.K[:, 0].any()
    with pytest.raises(ConfigError):
        train(dataclasses.replace(cfg, feedback="heading", init_mean=()), env, phi)


def test_zero_iterations():
    cfg, env, phi = _tiny()
    cfg = dataclasses.replace(cfg, iterations=0)
    pol, reps = train(cfg, env, phi)
    assert reps == []
    assert np.allclose(pol.C, cfg.init_cov * np.eye(2))


def test_deterministic_reports(tmp_path):
    cfg, env, phi = _tiny()
    a = train(cfg, env, phi)
    b = train(cfg, env, phi)
    assert np.array_equal(a[0].k, b[0].k) and np.array_equal(a[0].C, b[0].C)
    for p, q in zip(a[1], b[1]):
        assert dataclasses.replace(p, wall_ms=0) == dataclasses.replace(q, wall_ms=0)
    write_learning_curve(tmp_path / "a.csv", a[1], wall_clock=False)
    write_learning_curve(tmp_path / "b.csv", b[1], wall_clock=False)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_report_integrity_and_instrumentation():
    cfg, env, phi = _tiny()
    seen = []

    def cb(rep, batch, imp):
        rho = [robustness(s, phi) for s in batch.states]
        seen.append((rep, float(np.mean(rho)), imp))

    train(cfg, env, phi, callback=cb)
    assert len(seen) == 2
    for rep, mean, imp in seen:
        assert rep.mean_rho == mean
        assert rep.max_step_sq <= cfg.epsilon + 1e-9 and rep.min_gain >= 0.0
        assert np.all(imp.after >= imp.before)


def test_learning_curve_round_trip(tmp_path):
    reps = [IterationReport(i, 0.1 * i, 1.0, -1.0, 0.2, 0.5, 12.3456) for i in range(3)]
    path = tmp_path / "lc.csv"
    write_learning_curve(path, reps)
    rows = read_learning_curve(path)
    assert [r["iteration"] for r in rows] == [0, 1, 2]
    assert rows[2]["mean_rho"] == reps[2].mean_rho
    assert rows[0]["wall_ms"] == 12.346


def test_horizon_and_dimension_checks():
    cfg, env, phi = _tiny()
    with pytest.raises(ConfigError):
        train(dataclasses.replace(cfg, T=11), env, phi)
    _, wide = parse_spec("".join(f"var v{i} : {i};\n" for i in range(8)) + "v7 > 0")
    with pytest.raises(ConfigError):
        train(cfg, env, wide)


def test_drop_warning(caplog):
    cfg, env, phi = _tiny()
    cfg = dataclasses.replace(cfg, iterations=6, alpha=50.0)
    with caplog.at_level(logging.WARNING, logger="tlps.search"):
        _, reps = train(cfg, env, phi)
    drops = [
        i for i in range(2, len(reps))
        if reps[i].mean_rho_smooth < reps[i - 1].mean_rho_smooth < reps[i - 2].mean_rho_smooth
    ]
    flagged = [r.iteration for r in reps if r.warnings]
    assert set(drops) <= set(flagged)
