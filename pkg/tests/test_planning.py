import numpy as np
import pytest

from pril.errors import SingularSystem
from pril.gridworld import RIGHT, TabularMDP, build_mdp, bundled_map, parse_map
from pril.planning import (Policy, argmax_lowest, evaluate_return, greedy_policy, policy_evaluation_exact,
                           value_iteration)
from pril.privacy import NoiseSpec


def two_cell():
    return build_mdp(parse_map("YG"), wind=0.0)


def test_single_absorbing_state():
    mdp = TabularMDP(P=np.ones((1, 1, 1)), R=[1.0], gamma=0.99, start_dist=[1.0], terminal=[True])
    np.testing.assert_array_equal(value_iteration(mdp).values, [1.0])


def test_two_cell_values_and_greedy_action():
    res = value_iteration(two_cell())
    np.testing.assert_allclose(res.values, [0.99, 1.0], atol=1e-12)
    assert res.policy.greedy()[0] == RIGHT
    assert res.converged


def test_terminal_row_is_action_zero():
    res = value_iteration(two_cell())
    np.testing.assert_array_equal(res.policy.probs[1], [1, 0, 0, 0])


def test_all_ties_pick_action_zero():
    mdp = build_mdp(parse_map("YSS\nSSS\nSSG"), wind=0.0).with_rewards(np.zeros(9))
    assert np.all(greedy_policy(mdp, np.zeros(9)).greedy() == 0)


def test_argmax_lowest_near_ties():
    q = np.array([[1.0, 1.0 + 1e-14, 0.0], [0.0, 2.0, 2.0]])
    np.testing.assert_array_equal(argmax_lowest(q), [0, 1])


def test_exact_evaluation_geometric_series():
    mdp = TabularMDP(P=np.ones((1, 1, 1)), R=[1.0], gamma=0.5, start_dist=[1.0])
    np.testing.assert_allclose(policy_evaluation_exact(mdp, Policy(np.ones((1, 1)))), [2.0])


def test_exact_evaluation_zero_reward():
    mdp = build_mdp(bundled_map("5x5_03"))
    mdp = mdp.with_rewards(np.zeros(mdp.n_states))
    pol = Policy.from_actions(np.zeros(mdp.n_states, dtype=int), 4)
    assert np.all(policy_evaluation_exact(mdp, pol) == 0.0)


def test_exact_evaluation_singular_system():
    mdp = TabularMDP(P=np.ones((1, 1, 1)), R=[1.0], gamma=0.0, start_dist=[1.0])
    bad = TabularMDP.__new__(TabularMDP)
    object.__setattr__(bad, "P", mdp.P)
    object.__setattr__(bad, "R", mdp.R)
    object.__setattr__(bad, "gamma", 1.0)
    object.__setattr__(bad, "start_dist", mdp.start_dist)
    object.__setattr__(bad, "terminal", np.zeros(1, dtype=bool))
    with pytest.raises(SingularSystem):
        policy_evaluation_exact(bad, Policy(np.ones((1, 1))))


def test_two_cell_vi_matches_exact():
    mdp = two_cell()
    res = value_iteration(mdp)
    np.testing.assert_allclose(res.values, policy_evaluation_exact(mdp, res.policy), atol=1e-8)


@pytest.mark.parametrize("m", ["5x5_01", "5x5_06", "10x10_04"])
def test_residuals_non_increasing(m):
    res = value_iteration(build_mdp(bundled_map(m)))
    assert np.all(np.diff(res.residuals) <= 1e-15)


def test_zero_noise_spec_is_noise_free():
    mdp = build_mdp(bundled_map("5x5_02"))
    a = value_iteration(mdp, rng=np.random.default_rng(0))
    b = value_iteration(mdp, noise=NoiseSpec(0.0), rng=np.random.default_rng(0))
    np.testing.assert_array_equal(a.values, b.values)


def test_noisy_vi_runs_to_cap_and_is_reproducible():
    mdp = build_mdp(bundled_map("5x5_02"))
    a = value_iteration(mdp, max_iters=300, noise=NoiseSpec(5.0), rng=np.random.default_rng(9))
    b = value_iteration(mdp, max_iters=300, noise=NoiseSpec(5.0), rng=np.random.default_rng(9))
    assert a.sweeps == 300 and not a.converged
    np.testing.assert_array_equal(a.values, b.values)
    assert a.values[mdp.terminal][0] == mdp.R[mdp.terminal][0]


def test_noisy_vi_requires_rng():
    with pytest.raises(ValueError):
        value_iteration(two_cell(), noise=NoiseSpec(1.0))


@pytest.mark.parametrize("kw", [{"conv_threshold": 0.0}, {"max_iters": 0}])
def test_vi_argument_checks(kw):
    with pytest.raises(ValueError):
        value_iteration(two_cell(), **kw)


def test_evaluate_return_two_cell():
    mdp = two_cell()
    assert evaluate_return(mdp, value_iteration(mdp).policy, episodes=5) == pytest.approx(0.99)


def test_evaluate_return_zero_rewards_off_grid():
    mdp = build_mdp(parse_map("YSS\nSSG"), wind=0.0).with_rewards(np.zeros(6))
    up = Policy.from_actions(np.zeros(6, dtype=int), 4)
    assert evaluate_return(mdp, up, episodes=3, max_steps=3) == 0.0


def test_evaluate_return_reproducible():
    mdp = build_mdp(bundled_map("5x5_05"))
    pol = Policy(np.full((25, 4), 0.25))
    a = evaluate_return(mdp, pol, episodes=5, rng=np.random.default_rng(3))
    b = evaluate_return(mdp, pol, episodes=5, rng=np.random.default_rng(3))
    assert a == b


def test_policy_validation():
    with pytest.raises(ValueError):
        Policy(np.array([[0.5, 0.6]]))
    with pytest.raises(ValueError):
        Policy(np.array([0.5, 0.5]))
    p = Policy(np.array([[0.2, 0.8], [0.5, 0.5]]))
    np.testing.assert_array_equal(p.determinized().probs, [[0, 1], [1, 0]])
