"""Reward reconstruction from a known model and an observed deterministic policy.

The attacker solves the finite-state max-margin LP: choose ``R`` with
``|R(s)| <= r_max`` that makes the observed action optimal everywhere, and
among those maximize the summed worst-case margin minus ``l1_penalty * |R|_1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pril.errors import SingularSystem
from pril.lp import solve_lp
from pril.planning import Policy


@dataclass(frozen=True)
class IrlConfig:
    r_max: float = 1.0
    # penalties of 5 and above zero out most reconstructions on the bundled grids
    l1_penalty: float = 0.5
    gamma: float = 0.99

    def __post_init__(self):
        if not (np.isfinite(self.r_max) and self.r_max > 0):
            raise ValueError("r_max must be finite and positive")
        if not (np.isfinite(self.l1_penalty) and self.l1_penalty >= 0):
            raise ValueError("l1_penalty must be finite and non-negative")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")


@dataclass
class ReconstructedReward:
    rewards: np.ndarray | None
    lp_objective: float
    solver_status: str
    pivots: int = 0

    @property
    def ok(self) -> bool:
        return self.solver_status == "optimal"


def _actions(policy) -> np.ndarray:
    if isinstance(policy, Policy):
        return policy.greedy()
    return np.asarray(policy, dtype=np.int64)


def occupancy_matrix(P, policy, gamma: float, terminal=None) -> np.ndarray:
    """``(I - gamma P_pi)^{-1}`` for the deterministic policy's transition matrix.

    Rows of ``terminal`` states are zeroed first: an episode stops there, so
    a terminal state's value is its own reward and nothing after it.
    """
    P = np.asarray(P, dtype=np.float64)
    actions = _actions(policy)
    S = P.shape[0]
    P_pi = P[np.arange(S), actions]
    if terminal is not None:
        P_pi = np.where(np.asarray(terminal, dtype=bool)[:, None], 0.0, P_pi)
    try:
        return np.linalg.solve(np.eye(S) - gamma * P_pi, np.eye(S))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def margin_rows(P, policy, gamma: float, terminal=None):
    """Constraint rows ``(P_{a*} - P_a) (I - gamma P_{a*})^{-1}`` for every non-chosen action.

    Returns a list with one entry per non-terminal state: the stacked rows for
    its alternative actions, and a flag telling whether some alternative has a
    transition row identical to the chosen one (its margin is then zero).
    """
    P = np.asarray(P, dtype=np.float64)
    S, A, _ = P.shape
    actions = _actions(policy)
    terminal = np.zeros(S, dtype=bool) if terminal is None else np.asarray(terminal, dtype=bool)
    occ = occupancy_matrix(P, actions, gamma, terminal)
    out = []
    for s in range(S):
        if terminal[s]:
            out.append((np.zeros((0, S)), False))
            continue
        best = actions[s]
        diffs = P[s, best][None, :] - np.delete(P[s], best, axis=0)
        tied = bool(np.any(np.all(diffs == 0.0, axis=1)))
        rows = diffs[np.any(diffs != 0.0, axis=1)] @ occ
        out.append((rows, tied))
    return out


def reconstruct_reward(P, policy, config: IrlConfig = IrlConfig(), terminal=None,
                       backend=None) -> ReconstructedReward:
    """Solve the max-margin LP for a reward that rationalizes ``policy``.

    Variables are ``R = pos - neg`` with ``0 <= pos, neg <= r_max`` plus one
    margin variable per state whose alternatives all differ from the chosen
    action. Terminal states carry no margin constraints.
    """
    P = np.asarray(P, dtype=np.float64)
    S = P.shape[0]
    lam = config.l1_penalty
    per_state = margin_rows(P, policy, config.gamma, terminal)
    margin_states = [s for s, (rows, tied) in enumerate(per_state) if rows.shape[0] and not tied]
    n_t = len(margin_states)
    n = 2 * S + n_t

    blocks = []
    for s, (rows, tied) in enumerate(per_state):
        if rows.shape[0] == 0:
            continue
        block = np.zeros((rows.shape[0], n))
        block[:, :S] = -rows
        block[:, S:2 * S] = rows
        if not tied:
            block[:, 2 * S + margin_states.index(s)] = 1.0
        blocks.append(block)
    box = np.hstack([np.eye(2 * S), np.zeros((2 * S, n_t))])
    A_ub = np.vstack(blocks + [box]) if blocks else box
    b_ub = np.concatenate([np.zeros(A_ub.shape[0] - 2 * S), np.full(2 * S, config.r_max)])
    c = np.concatenate([np.full(2 * S, -lam), np.ones(n_t)])

    res = solve_lp(c, A_ub, b_ub, backend=backend)
    if not res.ok:
        return ReconstructedReward(None, float("nan"), res.status, res.pivots)
    rewards = res.x[:S] - res.x[S:2 * S]
    return ReconstructedReward(rewards, res.objective, "optimal", res.pivots)


def irl_objective(P, policy, rewards, config: IrlConfig = IrlConfig(), terminal=None) -> float:
    """Margin-minus-penalty objective of a given reward vector (feasibility not checked)."""
    R = np.asarray(rewards, dtype=np.float64)
    total = 0.0
    for rows, tied in margin_rows(P, policy, config.gamma, terminal):
        if rows.shape[0] and not tied:
            total += float(np.min(rows @ R))
    return total - config.l1_penalty * float(np.abs(R).sum())


def policy_agreement(policy_a, policy_b, mask=None) -> float:
    """Fraction of (masked) states where the two greedy actions coincide."""
    a, b = _actions(policy_a), _actions(policy_b)
    if a.shape != b.shape:
        raise ValueError("policies cover different state sets")
    mask = np.ones(a.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("mask selects no states")
    return float(np.mean(a[mask] == b[mask]))
