import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pril.errors import BudgetTooSmall, NonFiniteGradient, TooFewStates, UnknownBudget
from pril.privacy import (DEFAULT_ORDERS, DpSgdConfig, NoiseSpec, PrivacyBudget, RdpAccountant,
                          bellman_sensitivity, clip_gradients, dp_optimizer_step, gaussian_sample,
                          rdp_calibrate, rdp_epsilon_of_gaussian, sigma_from_table)


@pytest.mark.parametrize("n, expected", [(25, 25 / 24), (100, 100 / 99), (2, 2.0)])
def test_bellman_sensitivity(n, expected):
    assert bellman_sensitivity(n) == pytest.approx(expected, rel=1e-15)


def test_bellman_sensitivity_published_value():
    assert round(bellman_sensitivity(25), 3) == 1.042 and bellman_sensitivity(25) < 1.05


def test_bellman_sensitivity_too_few_states():
    with pytest.raises(TooFewStates):
        bellman_sensitivity(1)


def test_gaussian_zero_sigma_is_exact_and_consumes_nothing():
    rng = np.random.default_rng(0)
    assert gaussian_sample(0.0, rng) == 0.0
    assert np.all(gaussian_sample(0.0, rng, size=4) == 0.0)
    assert rng.random() == np.random.default_rng(0).random()


def test_gaussian_statistics_at_vi_unit_budget():
    draws = gaussian_sample(20.80, np.random.default_rng(1), size=100_000)
    assert abs(draws.std() - 20.80) / 20.80 < 0.02
    assert abs(draws.mean()) < 4 * 20.80 / math.sqrt(100_000)


def test_gaussian_reproducible():
    a = gaussian_sample(3.0, np.random.default_rng(5), size=10)
    b = gaussian_sample(3.0, np.random.default_rng(5), size=10)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("cls, eps, sigma", [("VI", 0.5, 83.20), ("DQN", 0.105, 150), ("PPO", math.inf, 0.0),
                                             ("VI-DP-Bellman", 1.0, 20.80), ("PPO-DP-Shoe", 0.1, 94229)])
def test_sigma_table(cls, eps, sigma):
    assert sigma_from_table(cls, eps) == sigma


def test_sigma_table_unknown_budget():
    with pytest.raises(UnknownBudget):
        sigma_from_table("VI", 0.3)
    with pytest.raises(KeyError):
        sigma_from_table("SARSA", 1.0)


def test_budget_and_noise_validation():
    assert not PrivacyBudget().is_private
    with pytest.raises(ValueError):
        PrivacyBudget(epsilon=0.0)
    with pytest.raises(ValueError):
        PrivacyBudget(delta=1.0)
    with pytest.raises(ValueError):
        NoiseSpec(-1.0)
    with pytest.raises(ValueError):
        DpSgdConfig(clip_norm=math.inf, sigma=1.0)


def test_rdp_epsilon_matches_dense_scan():
    # brute force over alpha in (1, 200] at resolution 1e-3
    alphas = np.arange(1.001, 200.0, 1e-3)
    scan = np.min(alphas / 2.0 + math.log(1e5) / (alphas - 1.0))
    closed = rdp_epsilon_of_gaussian(1.0, 1.0, 1, 1e-5)
    assert closed <= scan + 1e-12
    assert scan - closed < 1e-5


def test_rdp_epsilon_on_order_grid_matches_accountant():
    acc = RdpAccountant()
    acc.compose_gaussian(2.0, 1.0, steps=7)
    eps_grid = rdp_epsilon_of_gaussian(2.0, 1.0, 7, orders=DEFAULT_ORDERS)
    assert acc.epsilon()[0] == pytest.approx(eps_grid, rel=1e-12)


def test_rdp_epsilon_limits_and_monotonicity():
    assert rdp_epsilon_of_gaussian(1e9, 1.0, 1) < 1e-3
    assert rdp_epsilon_of_gaussian(0.0, 1.0, 1) == math.inf
    for sigma in (0.5, 2.0, 30.0):
        assert rdp_epsilon_of_gaussian(sigma, 1.0, 20) >= rdp_epsilon_of_gaussian(sigma, 1.0, 10)


def test_accountant_additivity_is_exact():
    one, many = RdpAccountant(), RdpAccountant()
    one.compose_gaussian(1.3, 1.05)
    for _ in range(5):
        many.compose_gaussian(1.3, 1.05)
    assert np.array_equal(many.rdp(), 5 * one.rdp())
    assert many.steps == 5


@given(st.floats(0.05, 50.0), st.integers(1, 5000))
def test_calibration_round_trip(eps, steps):
    budget = PrivacyBudget(eps)
    sigma = rdp_calibrate(budget, 1.0, steps)
    assert rdp_epsilon_of_gaussian(sigma, 1.0, steps) <= eps
    assert rdp_epsilon_of_gaussian(sigma * (1 - 1e-3), 1.0, steps) > eps


def test_calibration_monotone_and_infinite():
    assert rdp_calibrate(PrivacyBudget(math.inf), 1.0, 10) == 0.0
    s = [rdp_calibrate(PrivacyBudget(e), 1.0, 3000) for e in (0.1, 0.5, 1.0, 5.0)]
    assert all(a > b for a, b in zip(s, s[1:]))


def test_calibration_budget_too_small():
    with pytest.raises(BudgetTooSmall):
        rdp_calibrate(PrivacyBudget(1e-9), 1.0, 10**6, sigma_cap=10.0)


@given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3), min_size=1, max_size=8),
       st.floats(0.01, 10.0))
def test_clipping_bound(rows, clip):
    out = clip_gradients(np.array(rows), clip)
    assert np.all(np.linalg.norm(out, axis=1) <= clip + 1e-12)


def test_dp_step_degenerate_is_plain_mean(rng):
    g = rng.normal(size=(5, 7)) * 0.01
    out = dp_optimizer_step(g, DpSgdConfig(clip_norm=1.0, sigma=0.0), rng)
    assert np.array_equal(out, (g * 1.0).mean(axis=0))


def test_dp_step_clips_single_gradient(rng):
    out = dp_optimizer_step(np.array([[6.0, 8.0]]), DpSgdConfig(clip_norm=1.0), rng)
    assert np.linalg.norm(out) == pytest.approx(1.0)


def test_dp_step_noise_scale():
    cfg = DpSgdConfig(clip_norm=2.0, sigma=3.0)
    rng = np.random.default_rng(8)
    out = np.array([dp_optimizer_step(np.zeros((5, 2000)), cfg, rng) for _ in range(20)])
    assert out.std() == pytest.approx(3.0 * 2.0 / 5, rel=0.02)


def test_dp_step_accounts_one_step_per_minibatch(rng):
    acc = RdpAccountant()
    cfg = DpSgdConfig(sigma=1.0)
    for _ in range(4):
        dp_optimizer_step(rng.normal(size=(5, 3)), cfg, rng, acc)
    assert acc.steps == 4


def test_dp_step_rejects_non_finite(rng):
    g = rng.normal(size=(4, 3))
    g[2, 1] = np.nan
    with pytest.raises(NonFiniteGradient) as err:
        dp_optimizer_step(g, DpSgdConfig(), rng)
    assert err.value.index == 2
