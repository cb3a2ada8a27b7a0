"""Vanilla (unclipped) PPO with a softmax actor and a state-value critic."""

from __future__ import annotations

import numpy as np

from pril.errors import DegenerateBatch, DivergedLoss
from pril.gridworld import TabularMDP
from pril.nn import MlpApproximator, make_optimizer
from pril.planning import Policy, Simulator
from pril.privacy import DpSgdConfig, RdpAccountant
from pril.training import TrainConfig, TrainResult, apply_group_gradients, build_network, softmax


def _collect(mdp, sim, pi, n_steps, state, ep_len, episode_limit, rng):
    """Roll the actor forward ``n_steps``; returns the batch and the carried episode state."""
    cum_pi = np.cumsum(pi, axis=1)
    s_b = np.empty(n_steps, dtype=np.int64)
    a_b = np.empty(n_steps, dtype=np.int64)
    s2_b = np.empty(n_steps, dtype=np.int64)
    done_b = np.zeros(n_steps, dtype=bool)
    cut_b = np.zeros(n_steps, dtype=bool)
    s = state
    for t in range(n_steps):
        a = sim.sample_action(cum_pi[s], rng)
        done = bool(mdp.terminal[s])
        s2 = s if done else sim.step(s, a, rng)
        ep_len += 1
        s_b[t], a_b[t], s2_b[t], done_b[t] = s, a, s2, done
        if done or ep_len >= episode_limit:
            cut_b[t] = True
            s, ep_len = sim.reset(rng), 0
        else:
            s = s2
    return (s_b, a_b, s2_b, done_b, cut_b), s, ep_len


def gae_advantages(rewards, values, next_values, done, cut, gamma, lam):
    """Generalized advantage estimates over one rollout segment.

    ``next_values`` must already be zero where the step ended an episode in a
    terminal state. Credit does not flow backwards across a ``cut``.
    """
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_values[t] - values[t]
        running = delta + (0.0 if cut[t] else gamma * lam * running)
        adv[t] = running
    return adv


def train_ppo(mdp: TabularMDP, config: TrainConfig, actor: MlpApproximator | None = None,
              critic: MlpApproximator | None = None, dp_actor: DpSgdConfig | None = None,
              rng: np.random.Generator | None = None, activation: str = "relu",
              accountant: RdpAccountant | None = None) -> TrainResult:
    """Actor-critic training with the importance-ratio surrogate ``E[pi/pi_old * A]``.

    A fresh batch of ``batch_size`` steps is collected every ``ppo_epochs``
    iterations and reused for that many actor updates. Only the actor may be
    private; the critic regresses lambda-returns by squared error.
    Returns the stochastic actor policy.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    S, A = mdp.n_states, mdp.n_actions
    act = dp_actor.activation if dp_actor else activation
    if actor is None:
        actor = build_network(S, A, config, act, rng)
    if critic is None:
        critic = build_network(S, 1, config, act, rng)
    if dp_actor is not None and accountant is None:
        accountant = RdpAccountant()
    kind = dp_actor.optimizer if dp_actor else config.optimizer
    actor_opt = make_optimizer(kind, config.lr)
    critic_opt = make_optimizer(kind, config.lr)
    eye = np.eye(S)
    sim = Simulator(mdp)
    episode_limit = config.episode_limit(S)
    B, G = config.batch_size, config.microbatches
    per_group = B // G
    rows = np.arange(B)

    state, ep_len = sim.reset(rng), 0
    updates = 0
    history = []
    batch = None
    for it in range(config.total_iterations):
        if it % config.ppo_epochs == 0:
            pi_old = softmax(actor.forward(eye))
            values = critic.forward(eye)[:, 0]
            batch, state, ep_len = _collect(mdp, sim, pi_old, B, state, ep_len, episode_limit, rng)
            s_b, a_b, s2_b, done_b, cut_b = batch
            if len(s_b) == 0:
                raise DegenerateBatch("rollout produced no steps")
            next_v = np.where(done_b, 0.0, values[s2_b])
            adv = gae_advantages(mdp.R[s_b], values[s_b], next_v, done_b, cut_b,
                                 config.gamma, config.gae_lambda)
            returns = adv + values[s_b]
            adv_n = adv
            if config.normalize_advantages:
                adv_n = adv - adv.mean()
                spread = adv.std()
                if spread > 1e-6:
                    adv_n = adv_n / spread
            old_p = pi_old[s_b, a_b]

        out, cache = actor.forward_cache(eye[s_b])
        if not np.all(np.isfinite(out)):
            raise DivergedLoss(it, float("nan"))
        pi = softmax(out)
        ratio = pi[rows, a_b] / old_p
        log_pi = np.log(np.maximum(pi, 1e-300))
        entropy = -np.sum(pi * log_pi, axis=1)
        beta = config.entropy_weight(it)
        loss = -float(np.mean(ratio * adv_n)) - beta * float(np.mean(entropy))
        # d(ratio)/d(logits) = ratio * (onehot(a) - pi); dH/d(logits) = -pi * (log pi + H)
        onehot = np.zeros_like(pi)
        onehot[rows, a_b] = 1.0
        grad_out = -(adv_n * ratio)[:, None] * (onehot - pi)
        grad_out += beta * pi * (log_pi + entropy[:, None])
        grad_out /= per_group
        group_grads = actor.group_gradients(cache, grad_out, G)
        apply_group_gradients(actor, actor_opt, group_grads, dp_actor, rng, accountant,
                              config.max_grad_norm)

        v_out, v_cache = critic.forward_cache(eye[s_b])
        v_err = v_out[:, 0] - returns
        v_loss = 0.5 * float(np.mean(v_err * v_err))
        if not (np.isfinite(loss) and np.isfinite(v_loss)):
            raise DivergedLoss(it, loss if not np.isfinite(loss) else v_loss)
        v_grad = critic.backward(v_cache, v_err[:, None] / B)
        if config.max_grad_norm is not None:
            v_norm = float(np.linalg.norm(v_grad))
            if v_norm > config.max_grad_norm:
                v_grad = v_grad * (config.max_grad_norm / v_norm)
        critic_opt.step(critic.params, v_grad)
        updates += 1
        history.append((loss, v_loss))

    probs = softmax(actor.forward(eye))
    if not np.all(np.isfinite(probs)):
        raise DivergedLoss(config.total_iterations, float("nan"))
    result = TrainResult(Policy(probs), updates, accountant, history)
    result.critic = critic
    return result
