"""Closed-form reference values and gamma bookkeeping.

The expected-value constants below were frozen from an independent oracle
script (direct evaluation plus brute-force Monte Carlo over exponential tie
times) before the library was written; the tests compare against those
literals, not against the library's own output.
"""
from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lastgen.core import MinerId, Role
from lastgen.metrics import (Choice, aggregate, expected_gamma_ideal,
                             gamma_event, gamma_upper_bound)

# frozen oracle values
BOUND_20_20_600 = 0.07675913755469294
BOUND_200_20_600 = 0.26772048981954427
IDEAL_20_20_1200 = 0.023585842926341305
IDEAL_20_20_600 = 0.044512630070501824


def mk_choice(i, follows, weight=0.0005):
    return Choice(miner=MinerId(i, Role.HONEST), chose_adversary=follows,
                  weight=weight)


# --- closed forms -----------------------------------------------------------

def test_bound_values():
    assert gamma_upper_bound(0.0, 0.0, 600.0) == 0.0
    assert abs(gamma_upper_bound(20.0, 20.0, 600.0) - 0.076759) < 1e-6
    assert abs(gamma_upper_bound(200.0, 20.0, 600.0) - 0.267718) < 1e-5
    assert gamma_upper_bound(20.0, 20.0, 600.0) == BOUND_20_20_600
    assert gamma_upper_bound(200.0, 20.0, 600.0) == BOUND_200_20_600


def test_bound_is_below_half_and_monotone():
    prev = -1.0
    # beyond ~1e4 the exp term drops under 0.5's half-ulp and rounds away
    for d_o in (0.0, 10.0, 100.0, 1e3, 1e4):
        v = gamma_upper_bound(d_o, 20.0, 600.0)
        assert prev < v < 0.5
        prev = v
    assert gamma_upper_bound(1e9, 1e9, 600.0) == pytest.approx(0.5, abs=1e-12)
    # decreasing in the interval
    assert gamma_upper_bound(20, 20, 1200) < gamma_upper_bound(20, 20, 600)


def test_bound_input_validation():
    with pytest.raises(ValueError):
        gamma_upper_bound(20.0, 20.0, 0.0)
    with pytest.raises(ValueError):
        gamma_upper_bound(20.0, 20.0, -600.0)
    with pytest.raises(ValueError):
        gamma_upper_bound(-1.0, 20.0, 600.0)


def test_ideal_values():
    assert expected_gamma_ideal(0.0, 0.0, 600.0) == 0.0
    assert abs(expected_gamma_ideal(20.0, 20.0, 1200.0) - 0.023586) < 1e-5
    assert expected_gamma_ideal(20.0, 20.0, 1200.0) == IDEAL_20_20_1200
    assert expected_gamma_ideal(20.0, 20.0, 600.0) == IDEAL_20_20_600


def test_ideal_input_validation():
    with pytest.raises(ValueError):
        expected_gamma_ideal(20.0, 20.0, 0.0)
    with pytest.raises(ValueError):
        expected_gamma_ideal(20.0, -1.0, 600.0)


@settings(max_examples=300)
@given(d_o=st.floats(0, 1e4), d_b=st.floats(0, 1e4),
       t=st.floats(min_value=1e-3, max_value=1e6))
def test_ideal_never_exceeds_bound(d_o, d_b, t):
    assert expected_gamma_ideal(d_o, d_b, t) <= gamma_upper_bound(d_o, d_b, t) + 1e-15


def test_ideal_monte_carlo_oracle():
    """Brute-force the ideal-case expectation, independent of the library
    formula: tie times ~ Exp(mean T); a tie released inside [2*d_b,
    2*d_o + 3*d_b] is a fair coin, anything else loses outright."""
    rng = np.random.default_rng(404)
    d_o = d_b = 20.0
    for t_mean in (600.0, 1200.0):
        tau = rng.exponential(t_mean, 400_000)
        coin_zone = (tau >= 2 * d_b) & (tau <= 2 * d_o + 3 * d_b)
        est = 0.5 * coin_zone.mean()
        se = 0.5 * coin_zone.std(ddof=1) / math.sqrt(len(tau))
        want = expected_gamma_ideal(d_o, d_b, t_mean)
        assert abs(est - want) < 4 * se


# --- gamma bookkeeping ------------------------------------------------------

def test_gamma_event_examples():
    all_follow = [mk_choice(i, True) for i in range(10)]
    none_follow = [mk_choice(i, False) for i in range(10)]
    assert gamma_event(all_follow) == 1.0
    assert gamma_event(none_follow) == 0.0
    mixed = [Choice(MinerId(0, Role.HONEST), True, 0.3),
             Choice(MinerId(1, Role.HONEST), False, 0.7)]
    assert gamma_event(mixed) == pytest.approx(0.3)


def test_gamma_event_errors():
    with pytest.raises(ValueError):
        gamma_event([])
    with pytest.raises(ValueError):
        gamma_event([Choice(MinerId(0, Role.HONEST), True, 0.0)])


@settings(max_examples=200)
@given(flags=st.lists(st.booleans(), min_size=1, max_size=40),
       scale=st.floats(min_value=1e-6, max_value=1e6))
def test_gamma_event_scale_invariance(flags, scale):
    base = [mk_choice(i, f, weight=1.0) for i, f in enumerate(flags)]
    scaled = [mk_choice(i, f, weight=scale) for i, f in enumerate(flags)]
    assert gamma_event(base) == pytest.approx(gamma_event(scaled))


def test_aggregate_examples():
    assert aggregate([]) == (None, None)
    mean, err = aggregate([0.3])
    assert mean == pytest.approx(0.3) and err == 0.0
    mean, err = aggregate([1.0, 0.0])
    assert mean == pytest.approx(0.5)
    assert err == pytest.approx(0.5)  # sqrt(0.5/2)


def test_aggregate_fair_coin_concentration():
    rng = np.random.default_rng(11)
    events = (rng.random(10_000) < 0.5).astype(float)
    mean, err = aggregate(events)
    assert 0.48 <= mean <= 0.52
    assert err == pytest.approx(0.005, abs=0.0005)


@settings(max_examples=200)
@given(vals=st.lists(st.floats(min_value=0.0, max_value=1.0),
                     min_size=1, max_size=60))
def test_aggregate_mean_within_range_and_err_nonnegative(vals):
    mean, err = aggregate(vals)
    assert min(vals) - 1e-12 <= mean <= max(vals) + 1e-12
    assert err >= 0.0
