import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_bool, brute_rho, formulas, random_instance, trajectories
from tlps.tltl import (
    RHO_MAX,
    Affine,
    Always,
    And,
    Eventually,
    Next,
    Not,
    Or,
    Pred,
    TrueF,
    VariableMap,
    as_states,
    batch_robustness,
    eval_boolean,
    parse,
    robustness,
    robustness_signal,
)

S = VariableMap.from_names(["s"])
EX1 = parse("F(s > 5 & s < 10)", S)


def test_example_one():
    assert robustness([11.0, 6.0, 7.0], EX1) == 2.0
    assert eval_boolean([11.0, 6.0, 7.0], EX1)


def test_true_is_rho_max():
    assert robustness([3.0, -1.0], TrueF()) == RHO_MAX
    assert eval_boolean([3.0], TrueF())


def test_next_past_the_end():
    phi = parse("X X X s < 10", S)
    assert not eval_boolean([11.0, 6.0, 7.0], phi)
    assert robustness([11.0, 6.0, 7.0], phi) == -RHO_MAX


def test_negated_predicate():
    assert robustness([11.0], parse("!(s < 10)", S)) == 1.0


def test_until_matches_enumeration():
    phi = parse("(s < 4 U s > 8)", S)
    rng = np.random.default_rng(5)
    for _ in range(50):
        tau = rng.uniform(-2, 12, size=5)
        expect = max(
            min(tau[tp] - 8, min((4 - tau[tpp] for tpp in range(tp)), default=RHO_MAX)) for tp in range(5)
        )
        assert robustness(tau, phi) == expect


def test_start_index_and_signal():
    tau = np.array([0.0, 9.0, 1.0, 5.0])
    phi = parse("(s < 4 U s > 8)", S)
    sig = robustness_signal(tau, phi)
    assert [robustness(tau, phi, t) for t in range(4)] == list(sig)
    with pytest.raises(IndexError):
        robustness(tau, phi, 4)


def test_batch_matches_single():
    rng = np.random.default_rng(0)
    states = rng.normal(size=(6, 5, 1))
    phi = parse("G(s > -1 -> F s < 0.5)", S)
    assert np.array_equal(batch_robustness(states, phi), [robustness(s, phi) for s in states])


def test_rejects_non_finite():
    with pytest.raises(ValueError):
        as_states([1.0, np.nan])


def test_oracle_equivalence_sample():
    rng = np.random.default_rng(11)
    for k in range(500):
        phi, tau = random_instance(rng, integer=k % 2 == 0)
        assert robustness(tau, phi) == brute_rho(tau, phi)
        assert eval_boolean(tau, phi) == brute_bool(tau, phi)


@settings(max_examples=300, deadline=None)
@given(formulas(n=2, max_leaves=8), trajectories(n=2, max_T=6))
def test_sign_soundness(phi, tau):
    r = robustness(tau, phi)
    if abs(r) > 1e-9:
        assert eval_boolean(tau, phi) == (r > 0)


@settings(max_examples=300, deadline=None)
@given(formulas(n=2, max_leaves=8), trajectories(n=2, max_T=6), st.data())
def test_negation(phi, tau, data):
    t = data.draw(st.integers(0, len(tau) - 1))
    assert robustness(tau, Not(phi), t) == -robustness(tau, phi, t)


@settings(max_examples=200, deadline=None)
@given(formulas(n=2, max_leaves=5), formulas(n=2, max_leaves=5), trajectories(n=2, max_T=6))
def test_de_morgan(a, b, tau):
    assert robustness(tau, Not(And(a, b))) == robustness(tau, Or(Not(a), Not(b)))


@settings(max_examples=200, deadline=None)
@given(formulas(n=2, max_leaves=6), trajectories(n=2, max_T=6))
def test_eventually_always_duality(phi, tau):
    assert robustness(tau, Eventually(phi)) == -robustness(tau, Always(Not(phi)))


def _minmax_over(p):
    # pure min/max compositions of one predicate (no Until/Then)
    return st.recursive(
        st.just(p),
        lambda c: st.one_of(
            st.builds(And, c, c),
            st.builds(Or, c, c),
            st.builds(Eventually, c),
            st.builds(Always, c),
        ),
        max_leaves=6,
    )


@settings(max_examples=200, deadline=None)
@given(
    st.data(),
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6),
    st.sampled_from([0.5, 1.0, 2.0]),
)
def test_shared_predicate_shift(data, vals, delta):
    p = Pred(Affine((1.0,)), ">", 0.0)
    q = Pred(Affine((1.0,)), ">", -delta)  # every leaf margin grows by delta
    phi = data.draw(_minmax_over(p))

    def swap(f):
        if f == p:
            return q
        if isinstance(f, (And, Or)):
            return type(f)(swap(f.left), swap(f.right))
        return type(f)(swap(f.arg))

    tau = np.array(vals)
    assert robustness(tau, swap(phi)) == robustness(tau, phi) + delta


def test_next_window():
    tau = [1.0, 2.0, 3.0]
    assert robustness(tau, Next(parse("s > 0", S)), 1) == 3.0
    assert robustness(tau, Next(parse("s > 0", S)), 2) == -RHO_MAX
