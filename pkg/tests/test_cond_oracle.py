import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from core.coding import CodingFunction, RESET_PATTERN, base_coding, order_bound
from core.cond_oracle import (
    History,
    brute_force_cond_prob,
    cond_prob_history,
    continuity_probe,
    d_star,
    filter_step,
    markov_order_violations,
    positive_histories,
    posterior_after,
    prior_posterior,
)
from core.exceptions import ImpossibleHistoryError, PreconditionError
from core.ryabko_chain import stationary_prob
from core.verifier import continuity_suite
from utils.seeding import make_rng

TOL = 1e-12

ONE_ZERO_CODINGS = [CodingFunction(((z, 0),)) for z in (5, 7, 9)]


def test_prior_is_stationary():
    for f in [base_coding()] + ONE_ZERO_CODINGS:
        post = prior_posterior(f)
        assert math.isclose(post.total_mass(), 1.0, abs_tol=TOL)
        for s in range(14):
            assert math.isclose(post.prob(s), float(stationary_prob(s)), abs_tol=TOL)


def test_posterior_stays_normalized(rng):
    f = CodingFunction(((5, 0), (9, 0)))
    post = prior_posterior(f)
    for bit in (0, 0, 1, 1, 1, 0, 1, 1, 1, 1, 1, 0, 0, 1, 1, 1, 1, 1, 1, 1):
        post = filter_step(post, f, bit)
        assert math.isclose(post.total_mass(), 1.0, abs_tol=TOL)


@pytest.mark.parametrize("length", [2, 3, 5, 7])
def test_case_values_under_base_coding(length):
    f = base_coding()
    for history in positive_histories(f, length):
        p = cond_prob_history(f, history)
        if history[-2:] == (0, 0):
            assert abs(p - 1.0) < TOL, history
        elif history[-2:] == (1, 0):
            assert abs(p) < TOL, history
        elif all(history):
            assert abs(p - 0.5) < TOL, history


def test_impossible_history():
    with pytest.raises(ImpossibleHistoryError):
        posterior_after(base_coding(), (1, 0, 1))
    with pytest.raises(PreconditionError):
        filter_step(prior_posterior(base_coding()), base_coding(), 2)


def test_all_histories_of_length_two_are_positive():
    assert list(positive_histories(base_coding(), 2)) == [(0, 0), (0, 1), (1, 0), (1, 1)]


@pytest.mark.parametrize("f", [base_coding()] + ONE_ZERO_CODINGS)
def test_filter_matches_brute_force(f):
    violations = 0
    for length in range(1, 13):
        for history in positive_histories(f, length):
            interval = brute_force_cond_prob(f, history, 1e-9)
            if not interval.contains(cond_prob_history(f, history), TOL):
                violations += 1
    assert violations == 0


def test_brute_force_on_empty_history():
    interval = brute_force_cond_prob(base_coding(), (), 1e-6)
    # P(X_0 = 1) = P(M_0 >= 2) = 1/2
    assert interval.contains(0.5)
    assert interval.width < Fraction(1, 10 ** 5)


def test_brute_force_rejects_impossible_history():
    with pytest.raises(ImpossibleHistoryError):
        brute_force_cond_prob(base_coding(), (1, 0, 1), 1e-6)


def test_markov_order_holds_at_bound():
    f = CodingFunction(((5, 0),))
    assert order_bound(f) == 7
    assert markov_order_violations(f, extra=4) == []
    assert markov_order_violations(base_coding(), extra=4) == []


def test_one_bit_less_than_the_bound_is_not_enough():
    f = CodingFunction(((5, 0),))
    window = (0, 1, 1, 1, 0, 0)
    assert math.isclose(cond_prob_history(f, window), 17 / 25, abs_tol=TOL)
    assert math.isclose(cond_prob_history(f, (0,) + window), 2 / 3, abs_tol=TOL)
    assert math.isclose(cond_prob_history(f, (1,) + window), 1.0, abs_tol=TOL)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 1), min_size=8, max_size=8),
    st.lists(st.integers(0, 1), min_size=8, max_size=8),
    st.lists(st.integers(0, 1), min_size=8, max_size=8),
    st.integers(0, 8),
)
def test_d_star_is_a_bounded_metric(x, y, z, depth):
    hx, hy, hz = History(tuple(x)), History(tuple(y)), History(tuple(z))
    dxy, err = d_star(hx, hy, depth)
    dyx, _ = d_star(hy, hx, depth)
    dxz, _ = d_star(hx, hz, depth)
    dzy, _ = d_star(hz, hy, depth)
    assert 0.0 <= dxy <= 1.0
    assert dxy == dyx
    assert dxy <= dxz + dzy + 1e-15
    assert d_star(hx, hx, depth)[0] == 0.0
    assert err == 2.0 ** -depth


def test_d_star_weights_recent_bits_most():
    x = History((0, 0, 0))
    assert d_star(x, History((0, 0, 1)), 3)[0] == 0.5
    assert d_star(x, History((1, 0, 0)), 3)[0] == 0.125
    with pytest.raises(PreconditionError):
        d_star(x, History((0, 0)), 3)


@pytest.mark.parametrize("f", [base_coding(), CodingFunction(((5, 0),)), CodingFunction(((5, 0), (9, 0)))])
def test_continuity_after_reset(f):
    assert continuity_suite(f, 20, 100, make_rng(5)) <= TOL


def test_continuity_probe_single_history(rng):
    bits = (1, 1, 0, 0, 1, 1, 1, 0, 0, 1, 1, 1, 1)
    assert continuity_probe(CodingFunction(((7, 0),)), bits, 50, rng) <= TOL
    with pytest.raises(PreconditionError):
        continuity_probe(base_coding(), (1, 1, 1, 0), 10, rng)


def test_reset_pins_the_hidden_state():
    f = CodingFunction(((5, 0), (9, 0)))
    post = posterior_after(f, (1, 1, 0, 1) + RESET_PATTERN)
    assert post.atoms == ((2, 1.0),)
    assert post.tail is None
