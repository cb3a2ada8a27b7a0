"""Shared configuration and update plumbing for the DQN and PPO trainers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pril.nn import MlpApproximator
from pril.privacy import DpSgdConfig, RdpAccountant, dp_optimizer_step


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    iterations: int = 200
    test_episodes: int = 5
    lr: float = 0.15
    batch_size: int = 50
    microbatches: int = 5
    gamma: float = 0.99
    seed: int = 0
    optimizer: str = "sgd"
    hidden: tuple[int, ...] = (64, 64)
    # DQN
    replay_capacity: int = 10000
    target_update: int = 100
    eps_start: float = 1.0
    eps_end: float = 0.05
    env_steps_per_iteration: int = 10
    huber_delta: float = 1.0
    # PPO
    gae_lambda: float = 0.95
    ppo_epochs: int = 1
    entropy_coef: float = 0.5
    # entropy weight reached by linear decay at the last iteration (None keeps it constant)
    entropy_coef_final: float | None = 0.0
    normalize_advantages: bool = False
    # rescale each averaged update to at most this L2 norm (None disables)
    max_grad_norm: float | None = 1.0
    # episodes are cut after this many steps; None means 4 |S|
    max_episode_steps: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        counts = ("epochs", "iterations", "test_episodes", "batch_size", "microbatches",
                  "replay_capacity", "target_update", "env_steps_per_iteration", "ppo_epochs")
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.batch_size % self.microbatches:
            raise ValueError("batch_size must be divisible by microbatches")
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must lie in [0, 1)")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.entropy_coef < 0 or (self.entropy_coef_final is not None and self.entropy_coef_final < 0):
            raise ValueError("entropy weights must be non-negative")
        if not self.lr > 0:
            raise ValueError("lr must be positive")

    @property
    def total_iterations(self) -> int:
        return self.epochs * self.iterations

    def entropy_weight(self, iteration: int) -> float:
        if self.entropy_coef_final is None:
            return self.entropy_coef
        frac = iteration / max(self.total_iterations - 1, 1)
        return self.entropy_coef + (self.entropy_coef_final - self.entropy_coef) * frac

    def episode_limit(self, n_states: int) -> int:
        return 4 * n_states if self.max_episode_steps is None else self.max_episode_steps


@dataclass
class TrainResult:
    policy: "object"
    updates: int
    accountant: RdpAccountant | None = None
    history: list = field(default_factory=list)


def build_network(n_in: int, n_out: int, config: TrainConfig, activation: str,
                  rng: np.random.Generator) -> MlpApproximator:
    return MlpApproximator((n_in, *config.hidden, n_out), activation=activation, rng=rng)


def apply_group_gradients(net, optimizer, group_grads, dp: DpSgdConfig | None, rng, accountant,
                          max_norm: float | None = None) -> None:
    """Average micro-batch gradients (privately when ``dp`` is set) and take one optimizer step."""
    if dp is None:
        grad = group_grads.mean(axis=0)
    else:
        grad = dp_optimizer_step(group_grads, dp, rng, accountant)
    if max_norm is not None:
        norm = float(np.linalg.norm(grad))
        if norm > max_norm:
            grad = grad * (max_norm / norm)
    optimizer.step(net.params, grad)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
