from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maxrl.mdp import ExtendedTransition
from maxrl.returns import (
    Trajectory,
    advantages,
    cum_return,
    gae,
    lambda_max_return,
    lambda_max_returns,
    max_return,
)

rewards_st = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30)
gamma_st = st.floats(0.1, 0.999)


def test_max_return_examples():
    assert max_return([0.0, 1.0], 0.5) == 0.5
    assert max_return([0.2, 0.0, 1.0], 0.9) == pytest.approx(0.81)
    assert max_return([], 0.9) == 0.0


@settings(max_examples=100, deadline=None)
@given(rewards_st, gamma_st)
def test_max_return_bounds(rewards, gamma):
    g = max_return(rewards, gamma)
    assert 0.0 <= g <= max(rewards) + 1e-15
    assert g <= cum_return(rewards, gamma) + 1e-12


@settings(max_examples=60, deadline=None)
@given(rewards_st, gamma_st)
def test_y_update_tracks_the_max(rewards, gamma):
    # gamma**t * y_t is the running discounted max of the rewards seen so far
    y = 0.0
    for t, r in enumerate(rewards):
        y = max(r, y) / gamma
        assert gamma ** (t + 1) * y == pytest.approx(max_return(rewards[: t + 1], gamma), rel=1e-9)


def test_lambda_extremes():
    v = np.array([0.3, 0.5, 0.9])
    g = 0.9
    assert lambda_max_return(v, g, 0.0) == pytest.approx(g * v[0])
    assert lambda_max_return(v, g, 1.0) == pytest.approx(g**3 * v[2])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=15), gamma_st, st.floats(0.0, 1.0))
def test_recursive_form_matches_weighted_sum(values, gamma, lam):
    v = np.array(values)
    rec = lambda_max_returns(v, gamma, lam)
    for t in range(v.size):
        assert rec[t] == pytest.approx(lambda_max_return(v[t:], gamma, lam), rel=1e-9, abs=1e-12)


def _traj(n, gamma=0.9):
    trs = [ExtendedTransition(0, 0.0, 0, 0.0, 0, 0.0) for _ in range(n)]
    return Trajectory(trs, gamma)


def test_advantages_length_mismatch():
    with pytest.raises(ValueError):
        advantages(_traj(3), np.zeros(3), 0.5)


def test_advantages_zero_when_values_consistent():
    # v_t = gamma * v_{t+1} makes every n-step estimate equal to v_t
    gamma, T = 0.9, 5
    v = 0.5 * gamma ** (T - np.arange(T + 1))
    adv = advantages(_traj(T, gamma), v, 0.7)
    np.testing.assert_allclose(adv, 0.0, atol=1e-12)


def test_gae_lambda_zero_is_td_error():
    r = np.array([1.0, 0.0, 2.0])
    v = np.array([0.5, 0.2, 0.1])
    vn = np.array([0.2, 0.1, 0.0])
    np.testing.assert_allclose(gae(r, v, vn, 0.9, 0.0), r + 0.9 * vn - v)


def test_trajectory_chaining_check():
    gamma = 0.5
    t1 = ExtendedTransition(0, 0.0, 0, 0.25, 0, 0.5)
    t2 = ExtendedTransition(0, 0.5, 0, 0.0, 0, 1.0)
    assert Trajectory([t1, t2], gamma).check_chaining()
    bad = ExtendedTransition(0, 0.4, 0, 0.0, 0, 0.8)
    assert not Trajectory([t1, bad], gamma).check_chaining()
