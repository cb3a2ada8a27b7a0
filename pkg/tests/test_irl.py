import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from oracles import grid_search_irl, margin_matrix
from pril.gridworld import build_mdp, bundled_map
from pril.irl import IrlConfig, irl_objective, margin_rows, occupancy_matrix, policy_agreement, reconstruct_reward
from pril.planning import Policy, value_iteration


def highs_irl(P, actions, cfg, terminal):
    """The same max-margin LP in a different layout (R free, |R| via u, one t per state), solved by HiGHS."""
    S = P.shape[0]
    P_pi = P[np.arange(S), actions]
    P_pi = np.where(terminal[:, None], 0.0, P_pi)
    occ = np.linalg.inv(np.eye(S) - cfg.gamma * P_pi)
    # variables: R (S), u (S), t (S)
    A, b = [], []
    t_free = np.zeros(S, dtype=bool)
    for s in range(S):
        if terminal[s]:
            continue
        for a in range(P.shape[1]):
            if a == actions[s]:
                continue
            row = (P[s, actions[s]] - P[s, a]) @ occ
            z = np.zeros(3 * S)
            z[:S] = -row
            A.append(z.copy()); b.append(0.0)
            z[2 * S + s] = 1.0
            A.append(z); b.append(0.0)
            t_free[s] = True
    for s in range(S):
        for sign in (1.0, -1.0):
            z = np.zeros(3 * S)
            z[s], z[S + s] = sign, -1.0
            A.append(z); b.append(0.0)
    c = np.concatenate([np.zeros(S), np.full(S, cfg.l1_penalty), -np.ones(S)])
    bounds = [(-cfg.r_max, cfg.r_max)] * S + [(0, None)] * S + [(None, None) if f else (0, 0) for f in t_free]
    res = linprog(c, A_ub=np.array(A), b_ub=np.array(b), bounds=bounds, method="highs")
    assert res.status == 0
    return -res.fun


def test_single_action_mdp_gives_zero():
    P = np.zeros((3, 1, 3))
    P[[0, 1, 2], 0, [1, 2, 0]] = 1.0
    res = reconstruct_reward(P, np.zeros(3, dtype=int), IrlConfig(l1_penalty=0.5))
    assert res.ok and np.all(res.rewards == 0.0)


def test_stay_or_swap_matches_grid_search():
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[1, 0, 1] = 1.0  # action 0 stays
    P[0, 1, 1] = P[1, 1, 0] = 1.0  # action 1 swaps
    acts = np.array([0, 0])
    cfg = IrlConfig()
    res = reconstruct_reward(P, acts, cfg)
    strict, relaxed, lip = grid_search_irl(P, acts, cfg.gamma, cfg.l1_penalty)
    assert strict - 1e-9 <= res.lp_objective <= relaxed + 0.05 * lip
    # both states keep their own reward forever, so the best vertex sets them equal at the bound
    assert res.lp_objective == pytest.approx(irl_objective(P, acts, res.rewards, cfg))


def test_occupancy_identities(rng):
    P = rng.random((5, 3, 5))
    P /= P.sum(axis=2, keepdims=True)
    acts = rng.integers(3, size=5)
    np.testing.assert_allclose(occupancy_matrix(P, acts, 0.0), np.eye(5), atol=1e-15)
    occ = occupancy_matrix(P, acts, 0.9)
    np.testing.assert_allclose(occ.sum(axis=1), 10.0, rtol=1e-10)
    P_pi = P[np.arange(5), acts]
    np.testing.assert_allclose(occ @ (np.eye(5) - 0.9 * P_pi), np.eye(5), atol=1e-9)


def test_policy_agreement_examples():
    a = Policy.from_actions([0, 1], 2)
    b = Policy.from_actions([1, 0], 2)
    assert policy_agreement(a, a) == 1.0
    assert policy_agreement(a, b) == 0.0
    c = Policy.from_actions([0, 0, 1], 2)
    d = Policy.from_actions([0, 1, 1], 2)
    assert policy_agreement(c, d) == policy_agreement(d, c) == pytest.approx(2 / 3)
    assert policy_agreement(c, d, mask=[True, False, True]) == 1.0
    with pytest.raises(ValueError):
        policy_agreement(c, d, mask=[False] * 3)


@st.composite
def random_problems(draw):
    S = draw(st.integers(2, 6))
    A = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    P = rng.random((S, A, S)) ** 3
    P /= P.sum(axis=2, keepdims=True)
    acts = rng.integers(A, size=S)
    lam = draw(st.sampled_from([0.0, 0.3, 1.0, 10.0]))
    return P, acts, IrlConfig(r_max=draw(st.sampled_from([0.5, 1.0, 3.0])), l1_penalty=lam, gamma=0.95)


@given(random_problems())
def test_always_feasible_bounded_and_consistent(problem):
    P, acts, cfg = problem
    res = reconstruct_reward(P, acts, cfg)
    assert res.ok
    assert np.all(np.abs(res.rewards) <= cfg.r_max + 1e-9)
    for rows, _ in margin_rows(P, acts, cfg.gamma):
        assert np.all(rows @ res.rewards >= -1e-8)
    assert res.lp_objective == pytest.approx(irl_objective(P, acts, res.rewards, cfg), abs=1e-7)
    assert res.lp_objective >= -1e-9  # R = 0 is feasible with objective 0


@given(random_problems(), st.floats(0.01, 1.0))
def test_constraints_are_scale_free(problem, c):
    P, acts, cfg = problem
    R = reconstruct_reward(P, acts, cfg).rewards
    for rows, _ in margin_rows(P, acts, cfg.gamma):
        assert np.all(rows @ (c * R) >= -1e-8)


@pytest.mark.parametrize("m", ["5x5_01", "5x5_04", "5x5_11", "10x10_05"])
@pytest.mark.parametrize("lam", [0.0, 1.0, 10.0])
def test_matches_highs_formulation(m, lam):
    mdp = build_mdp(bundled_map(m))
    acts = value_iteration(mdp).policy.greedy()
    cfg = IrlConfig(l1_penalty=lam)
    ours = reconstruct_reward(mdp.P, acts, cfg, terminal=mdp.terminal)
    assert ours.ok
    assert ours.lp_objective == pytest.approx(highs_irl(mdp.P, acts, cfg, mdp.terminal), abs=1e-5, rel=1e-6)


@pytest.mark.parametrize("m", ["5x5_01", "5x5_07", "10x10_01"])
def test_true_reward_rationalizes_optimal_policy(m):
    mdp = build_mdp(bundled_map(m))
    acts = value_iteration(mdp).policy.greedy()
    for rows, _ in margin_rows(mdp.P, acts, mdp.gamma, mdp.terminal):
        assert np.all(rows @ mdp.R >= -1e-6)


def test_margin_rows_agree_with_explicit_inverse(rng):
    P = rng.random((4, 3, 4))
    P /= P.sum(axis=2, keepdims=True)
    acts = rng.integers(3, size=4)
    ours = margin_rows(P, acts, 0.8)
    ref = margin_matrix(P, acts, 0.8)
    for (rows, tied), expected in zip(ours, ref):
        assert not tied
        np.testing.assert_allclose(rows, expected, atol=1e-12)


def test_terminal_rows_are_skipped():
    mdp = build_mdp(bundled_map("5x5_02"))
    per_state = margin_rows(mdp.P, value_iteration(mdp).policy, mdp.gamma, mdp.terminal)
    goal = int(np.flatnonzero(mdp.terminal)[0])
    assert per_state[goal][0].shape[0] == 0


def test_config_validation():
    for kw in ({"r_max": 0.0}, {"r_max": np.inf}, {"l1_penalty": -1.0}, {"gamma": 1.0}):
        with pytest.raises(ValueError):
            IrlConfig(**kw)
