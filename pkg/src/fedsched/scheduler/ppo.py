"""PPO with Beta-distributed actions, built on tinynn."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..tinynn import Adam, BetaHead, DenseNet, load_params, save_params

log = logging.getLogger(__name__)


@dataclass
class PpoHyper:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    epochs: int = 10
    minibatch: int = 64
    lr: float = 3e-4
    capacity: int = 1000
    hidden: tuple = (64, 64)
    max_grad_norm: float = 0.5


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray
    log_prob: float
    reward: float
    value: float
    done: bool


@dataclass
class PpoBuffer:
    capacity: int = 1000
    transitions: list = field(default_factory=list)

    def add(self, t: Transition) -> None:
        self.transitions.append(t)

    @property
    def full(self) -> bool:
        return len(self.transitions) >= self.capacity

    def clear(self) -> None:
        self.transitions.clear()

    def __len__(self):
        return len(self.transitions)


def gae(rewards, values, dones, gamma, lam, last_value=0.0):
    """Generalised advantage estimates and value targets; ``done`` cuts bootstrapping."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(rewards)
    adv = np.zeros(n)
    running = 0.0
    next_value = last_value
    for i in range(n - 1, -1, -1):
        nonterminal = 0.0 if dones[i] else 1.0
        delta = rewards[i] + gamma * next_value * nonterminal - values[i]
        running = delta + gamma * lam * nonterminal * running
        adv[i] = running
        next_value = values[i]
    return adv, adv + values


def _clip_norm(g, max_norm):
    norm = float(np.linalg.norm(g))
    if max_norm and norm > max_norm:
        g = g * (max_norm / norm)
    return g


class PpoAgent:
    def __init__(self, state_dim, action_dim, rng, hyper: PpoHyper | None = None):
        self.hyper = hyper or PpoHyper()
        h = list(self.hyper.hidden)
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.actor = DenseNet([state_dim, *h, 2 * action_dim], rng=rng)
        self.critic = DenseNet([state_dim, *h, 1], rng=rng)
        # small output layers start the policy near its prior and the critic near zero
        self.actor.weights[-1] *= 0.01
        self.critic.weights[-1] *= 0.1
        self.head = BetaHead(action_dim)
        self.actor_opt = Adam(self.actor.n_params, self.hyper.lr)
        self.critic_opt = Adam(self.critic.n_params, self.hyper.lr)
        self.buffer = PpoBuffer(self.hyper.capacity)
        self.n_updates = 0

    def act(self, state, rng):
        """Sample an action; returns ``(action, log_prob, value)``."""
        raw = self.actor.forward(state)
        action = self.head.sample(raw, rng)
        return action, float(self.head.log_prob(raw, action)), float(self.critic.forward(state)[0])

    def act_mean(self, state):
        return self.head.mean(self.actor.forward(state))

    def value(self, state) -> float:
        return float(self.critic.forward(state)[0])

    def maybe_update(self):
        """Run an update if the buffer is full; call only at episode boundaries."""
        if not self.buffer.full:
            return None
        return self.update()

    def update(self):
        hp = self.hyper
        tr = self.buffer.transitions
        s = np.vstack([t.state for t in tr])
        a = np.vstack([t.action for t in tr])
        old_lp = np.array([t.log_prob for t in tr])
        values = np.array([t.value for t in tr])
        adv, ret = gae([t.reward for t in tr], values, [t.done for t in tr], hp.gamma, hp.gae_lambda)
        if len(adv) > 1:
            adv = (adv - adv.mean()) / (adv.std() + 1e-8)
        backup = (self.actor.params.copy(), self.critic.params.copy(),
                  (self.actor_opt.m.copy(), self.actor_opt.v.copy(), self.actor_opt.t),
                  (self.critic_opt.m.copy(), self.critic_opt.v.copy(), self.critic_opt.t))
        n = len(tr)
        rng = np.random.default_rng(self.n_updates)
        stats = {"actor_loss": 0.0, "critic_loss": 0.0, "batches": 0}
        try:
            for _ in range(hp.epochs):
                perm = rng.permutation(n)
                for start in range(0, n, hp.minibatch):
                    idx = perm[start:start + hp.minibatch]
                    al, cl = self._step(s[idx], a[idx], old_lp[idx], adv[idx], ret[idx])
                    stats["actor_loss"] += al
                    stats["critic_loss"] += cl
                    stats["batches"] += 1
        except FloatingPointError as exc:
            self.actor.set_params(backup[0])
            self.critic.set_params(backup[1])
            self.actor_opt.m, self.actor_opt.v, self.actor_opt.t = backup[2]
            self.critic_opt.m, self.critic_opt.v, self.critic_opt.t = backup[3]
            log.warning("PPO update aborted, weights restored: %s", exc)
            stats["aborted"] = True
        new_lp = self.head.log_prob(self.actor.forward(s), a)
        stats["approx_kl"] = float(np.mean(old_lp - new_lp))
        if stats["approx_kl"] > 1.0:
            log.warning("large policy shift after update: KL ~ %.3f", stats["approx_kl"])
        self.buffer.clear()
        self.n_updates += 1
        return stats

    def _step(self, s, a, old_lp, adv, ret):
        hp = self.hyper
        raw = self.actor.forward(s)
        lp = self.head.log_prob(raw, a)
        ratio = np.exp(lp - old_lp)
        surr = np.minimum(ratio * adv, np.clip(ratio, 1 - hp.clip, 1 + hp.clip) * adv)
        actor_loss = -float(np.mean(surr))
        clipped = ((adv > 0) & (ratio > 1 + hp.clip)) | ((adv < 0) & (ratio < 1 - hp.clip))
        d_lp = np.where(clipped, 0.0, -adv * ratio) / len(adv)
        d_raw = d_lp[:, None] * self.head.log_prob_grad(raw, a)
        g_actor = _clip_norm(self.actor.backward(s, d_raw), hp.max_grad_norm)

        v = self.critic.forward(s)[:, 0]
        critic_loss = float(np.mean((v - ret) ** 2))
        g_critic = _clip_norm(self.critic.backward(s, (2.0 * (v - ret) / len(ret))[:, None]),
                              hp.max_grad_norm)
        if not (np.isfinite(actor_loss) and np.isfinite(critic_loss)
                and np.all(np.isfinite(g_actor)) and np.all(np.isfinite(g_critic))):
            raise FloatingPointError("non-finite PPO loss or gradient")
        self.actor_opt.step(self.actor.params, g_actor)
        self.critic_opt.step(self.critic.params, g_critic)
        return actor_loss, critic_loss

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        save_params(self.actor, d / "actor.bin")
        save_params(self.critic, d / "critic.bin")

    @classmethod
    def load(cls, directory, hyper: PpoHyper | None = None) -> "PpoAgent":
        d = Path(directory)
        actor = load_params(d / "actor.bin")
        critic = load_params(d / "critic.bin")
        agent = cls.__new__(cls)
        agent.hyper = hyper or PpoHyper(hidden=tuple(actor.layer_sizes[1:-1]))
        agent.state_dim = actor.layer_sizes[0]
        agent.action_dim = actor.layer_sizes[-1] // 2
        agent.actor, agent.critic = actor, critic
        agent.head = BetaHead(agent.action_dim)
        agent.actor_opt = Adam(actor.n_params, agent.hyper.lr)
        agent.critic_opt = Adam(critic.n_params, agent.hyper.lr)
        agent.buffer = PpoBuffer(agent.hyper.capacity)
        agent.n_updates = 0
        return agent
