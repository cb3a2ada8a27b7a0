"""Deep Q-learning on a tabular MDP with one-hot state inputs."""

from __future__ import annotations

import numpy as np

from pril.errors import DivergedLoss
from pril.gridworld import TabularMDP
from pril.nn import MlpApproximator, make_optimizer
from pril.planning import Policy, Simulator, argmax_lowest
from pril.privacy import DpSgdConfig, RdpAccountant
from pril.training import TrainConfig, TrainResult, apply_group_gradients, build_network


class ReplayBuffer:
    """Fixed-capacity ring buffer of ``(s, a, r, s', done)`` with uniform sampling."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.s = np.zeros(capacity, dtype=np.int64)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros(capacity, dtype=np.int64)
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._ptr = 0

    def push(self, s, a, r, s2, done) -> None:
        i = self._ptr
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i] = s, a, r, s2, done
        self._ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = rng.integers(self.size, size=batch_size)
        return self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx]

    def __len__(self):
        return self.size


def train_dqn(mdp: TabularMDP, config: TrainConfig, net: MlpApproximator | None = None,
              dp: DpSgdConfig | None = None, rng: np.random.Generator | None = None,
              activation: str = "relu", accountant: RdpAccountant | None = None) -> TrainResult:
    """Train a Q-network with epsilon-greedy replay and a periodically copied target network.

    Each iteration takes ``env_steps_per_iteration`` environment steps, then
    one optimizer step on a uniformly sampled mini-batch whose Huber TD loss is
    split into ``config.microbatches`` micro-batches. With ``dp`` set, the
    micro-batch gradients are clipped and noised before the step. A terminal
    state is occupied for one step, collects its reward and ends the episode.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    S, A = mdp.n_states, mdp.n_actions
    if net is None:
        net = build_network(S, A, config, dp.activation if dp else activation, rng)
    if dp is not None and accountant is None:
        accountant = RdpAccountant()
    optimizer = make_optimizer(dp.optimizer if dp else config.optimizer, config.lr)
    target = net.copy()
    eye = np.eye(S)
    target_table = target.forward(eye)
    sim = Simulator(mdp)
    buffer = ReplayBuffer(config.replay_capacity)
    total = config.total_iterations
    decay = max(total // 2, 1)
    episode_limit = config.episode_limit(S)
    per_group = config.batch_size // config.microbatches
    rows = np.arange(config.batch_size)

    s, ep_len = sim.reset(rng), 0
    updates = 0
    history = []
    for it in range(total):
        eps = config.eps_start + (config.eps_end - config.eps_start) * min(1.0, it / decay)
        greedy = argmax_lowest(net.forward(eye))
        for _ in range(config.env_steps_per_iteration):
            if rng.random() < eps:
                a = int(rng.integers(A))
            else:
                a = int(greedy[s])
            done = bool(mdp.terminal[s])
            s2 = s if done else sim.step(s, a, rng)
            buffer.push(s, a, mdp.R[s], s2, done)
            ep_len += 1
            if done or ep_len >= episode_limit:
                s, ep_len = sim.reset(rng), 0
            else:
                s = s2

        if len(buffer) < config.batch_size:
            continue
        bs, ba, br, bs2, bdone = buffer.sample(config.batch_size, rng)
        y = br + config.gamma * np.where(bdone, 0.0, target_table[bs2].max(axis=1))
        out, cache = net.forward_cache(eye[bs])
        err = out[rows, ba] - y
        absd = np.abs(err)
        d = config.huber_delta
        loss = float(np.mean(np.where(absd <= d, 0.5 * err * err, d * (absd - 0.5 * d))))
        if not np.isfinite(loss):
            raise DivergedLoss(it, loss)
        grad_out = np.zeros_like(out)
        grad_out[rows, ba] = np.clip(err, -d, d) / per_group
        group_grads = net.group_gradients(cache, grad_out, config.microbatches)
        apply_group_gradients(net, optimizer, group_grads, dp, rng, accountant,
                              config.max_grad_norm)
        updates += 1
        history.append(loss)
        if updates % config.target_update == 0:
            target.params[:] = net.params
            target_table = target.forward(eye)

    q_table = net.forward(eye)
    if not np.all(np.isfinite(q_table)):
        raise DivergedLoss(total, float("nan"))
    actions = argmax_lowest(q_table)
    actions[mdp.terminal] = 0
    return TrainResult(Policy.from_actions(actions, A), updates, accountant, history)
