"""Independent reference computations used only by the tests."""

import itertools

import numpy as np


def deterministic_mdps(n_states: int, n_actions: int = 2):
    """Every transition tensor where each (state, action) moves to one state with certainty."""
    pairs = n_states * n_actions
    for nxt in itertools.product(range(n_states), repeat=pairs):
        P = np.zeros((n_states, n_actions, n_states))
        for k, t in enumerate(nxt):
            P[k // n_actions, k % n_actions, t] = 1.0
        yield P


def margin_matrix(P, actions, gamma):
    """Per state, the rows ``(P_chosen - P_other) inv(I - gamma P_chosen)`` built by explicit inversion."""
    S, A, _ = P.shape
    P_pi = np.array([P[s, actions[s]] for s in range(S)])
    occ = np.linalg.inv(np.eye(S) - gamma * P_pi)
    rows = []
    for s in range(S):
        rows.append(np.array([(P[s, actions[s]] - P[s, a]) @ occ for a in range(A) if a != actions[s]]))
    return rows


def grid_search_irl(P, actions, gamma, l1_penalty, r_max=1.0, step=0.1):
    """Exhaustive search of the max-margin objective over a lattice of reward vectors.

    Returns ``(strict_max, relaxed_max, lipschitz)``: the best objective among
    lattice points satisfying every margin constraint exactly, the best among
    points whose margins may fall short by half a lattice step times the row's
    L1 norm, and the objective's Lipschitz constant in the max-norm. The true
    continuous optimum lies in ``[strict_max, relaxed_max + step / 2 * lipschitz]``.
    """
    S = P.shape[0]
    ticks = np.round(np.arange(-r_max, r_max + step / 2, step), 10)
    grid = np.array(list(itertools.product(ticks, repeat=S)))
    rows = margin_matrix(P, actions, gamma)
    objective = -l1_penalty * np.abs(grid).sum(axis=1)
    strict = np.ones(len(grid), dtype=bool)
    relaxed = np.ones(len(grid), dtype=bool)
    lipschitz = l1_penalty * S
    for M in rows:
        if M.size == 0:
            continue
        margins = grid @ M.T
        objective = objective + margins.min(axis=1)
        slack = step / 2 * np.abs(M).sum(axis=1)
        strict &= np.all(margins >= -1e-12, axis=1)
        relaxed &= np.all(margins >= -slack - 1e-12, axis=1)
        lipschitz += np.abs(M).sum(axis=1).max()
    return float(objective[strict].max()), float(objective[relaxed].max()), float(lipschitz)
