"""Exact planning on tabular MDPs: value iteration (optionally noisy), greedy
extraction, dense policy evaluation and Monte-Carlo return estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pril import kernels
from pril.errors import SingularSystem
from pril.gridworld import TabularMDP
from pril.privacy import NoiseSpec, gaussian_sample

# Q-values closer than this (relative) are treated as ties.
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class Policy:
    """Row-stochastic ``probs[s, a]``; the greedy view takes the lowest-index argmax."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 2:
            raise ValueError("policy probabilities must be a 2-D array")
        if np.any(p < 0) or np.max(np.abs(p.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("each policy row must be a probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_actions(cls, actions, n_actions: int) -> "Policy":
        actions = np.asarray(actions, dtype=np.int64)
        probs = np.zeros((actions.size, n_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    @property
    def n_actions(self) -> int:
        return self.probs.shape[1]

    def greedy(self) -> np.ndarray:
        return np.argmax(self.probs, axis=1)

    def determinized(self) -> "Policy":
        return Policy.from_actions(self.greedy(), self.n_actions)


@dataclass
class ValueIterationResult:
    values: np.ndarray
    policy: Policy
    sweeps: int
    residuals: np.ndarray
    converged: bool


def q_values(mdp: TabularMDP, V) -> np.ndarray:
    return mdp.R[:, None] + mdp.gamma * (mdp.P @ np.asarray(V, dtype=np.float64))


def argmax_lowest(q: np.ndarray) -> np.ndarray:
    """Row-wise argmax with near-ties resolved to the lowest index."""
    top = q.max(axis=1, keepdims=True)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(top))
    return np.argmax(q >= top - tol, axis=1)


def greedy_policy(mdp: TabularMDP, V) -> Policy:
    """One-hot policy maximizing ``R(s) + gamma * sum_s' P(s, a, s') V(s')``.

    Terminal rows put all mass on action 0.
    """
    actions = argmax_lowest(q_values(mdp, V))
    actions[mdp.terminal] = 0
    return Policy.from_actions(actions, mdp.n_actions)


def value_iteration(mdp: TabularMDP, conv_threshold: float = 1e-10, max_iters: int = 10000,
                    noise: NoiseSpec | None = None, rng: np.random.Generator | None = None,
                    backend=None) -> ValueIterationResult:
    """Synchronous value iteration with optional Gaussian noise on every update.

    Stops when the max-norm change of a sweep falls below ``conv_threshold``
    or after ``max_iters`` sweeps. Noisy runs normally use every sweep; that
    is not an error. Terminal states stay pinned at their reward.
    """
    if conv_threshold <= 0:
        raise ValueError("conv_threshold must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    sigma = 0.0 if noise is None else float(noise.sigma)
    if sigma > 0:
        if rng is None:
            raise ValueError("a random generator is required for noisy value iteration")
        draws = gaussian_sample(sigma, rng, size=(max_iters, mdp.n_states))
    else:
        draws = np.empty((0, mdp.n_states))

    impl = kernels if backend is None else backend
    idx, prob = mdp.successors
    values = np.where(mdp.terminal, mdp.R, 0.0)
    residuals = np.zeros(max_iters)
    sweeps = impl.bellman_sweeps(
        idx, prob, np.ascontiguousarray(mdp.R), mdp.gamma,
        mdp.terminal.astype(np.uint8), values, np.ascontiguousarray(draws),
        float(conv_threshold), int(max_iters), residuals,
    )
    residuals = residuals[:sweeps]
    return ValueIterationResult(
        values, greedy_policy(mdp, values), int(sweeps), residuals, bool(residuals[-1] < conv_threshold)
    )


def policy_matrix(mdp: TabularMDP, policy: Policy) -> np.ndarray:
    """``P_pi[s, s'] = sum_a pi(a | s) P(s, a, s')``."""
    return np.einsum("sa,sat->st", policy.probs, mdp.P)


def policy_evaluation_exact(mdp: TabularMDP, policy: Policy) -> np.ndarray:
    """Solve ``(I - gamma P_pi) V = R`` directly, with terminal rows pinned to ``V = R``."""
    n = mdp.n_states
    A = np.eye(n) - mdp.gamma * policy_matrix(mdp, policy)
    A[mdp.terminal] = np.eye(n)[mdp.terminal]
    try:
        V = np.linalg.solve(A, mdp.R)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(V)):
        raise SingularSystem("policy evaluation produced non-finite values")
    return V


class Simulator:
    """Samples trajectories of a tabular MDP by inverse-CDF lookups."""

    def __init__(self, mdp: TabularMDP):
        self.mdp = mdp
        self._cum_p = np.cumsum(mdp.P, axis=2)
        self._cum_start = np.cumsum(mdp.start_dist)

    @staticmethod
    def _pick(cum, u) -> int:
        return min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)

    def reset(self, rng: np.random.Generator) -> int:
        return self._pick(self._cum_start, rng.random())

    def step(self, state: int, action: int, rng: np.random.Generator) -> int:
        return self._pick(self._cum_p[state, action], rng.random())

    def sample_action(self, cum_probs_row, rng: np.random.Generator) -> int:
        return self._pick(cum_probs_row, rng.random())


def evaluate_return(mdp: TabularMDP, policy: Policy, episodes: int = 5, gamma: float | None = None,
                    max_steps: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Mean discounted return ``sum_j gamma^j R(s_j)`` over sampled episodes.

    An episode collects the reward of each state it occupies, starting with
    the start state, and ends on reaching a terminal state or after
    ``max_steps`` rewards (default ``4 |S|``).
    """
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    gamma = mdp.gamma if gamma is None else gamma
    max_steps = 4 * mdp.n_states if max_steps is None else max_steps
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    rng = np.random.default_rng(0) if rng is None else rng
    sim = Simulator(mdp)
    cum_pi = np.cumsum(policy.probs, axis=1)
    total = 0.0
    for _ in range(episodes):
        s = sim.reset(rng)
        ret, discount = 0.0, 1.0
        for _ in range(max_steps):
            ret += discount * mdp.R[s]
            if mdp.terminal[s]:
                break
            a = sim.sample_action(cum_pi[s], rng)
            s = sim.step(s, a, rng)
            discount *= gamma
        total += ret
    return total / episodes
