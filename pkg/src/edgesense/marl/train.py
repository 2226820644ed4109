"""Clipped policy-gradient training with per-server actors and a shared critic.

Each agent samples radius actions from its own actor. One critic sees the
concatenated global state and predicts a value per agent. Transitions pile
up in a buffer; once it holds ``batch_size`` of them, advantages are
estimated with GAE and both networks take ``epochs`` gradient steps against
the policy frozen at the start of the update.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..config import Hyperparams
from ..errors import DivergedLoss
from .agents import sample_actions
from .approx import Approximator, dump_approximators, load_approximators
from .env import MarlEnv, apply_gate
from .objectives import actor_loss, critic_loss, gae, returns, softmax3

log = logging.getLogger(__name__)


@dataclass
class PolicyParams:
    actors: list[Approximator | None]
    critic: Approximator

    def copy(self) -> "PolicyParams":
        return PolicyParams([a.copy() if a is not None else None for a in self.actors],
                            self.critic.copy())

    def to_text(self) -> str:
        named = [(f"actor_{k}", a) for k, a in enumerate(self.actors)] + [("critic", self.critic)]
        return dump_approximators(named)

    @classmethod
    def from_text(cls, text: str) -> "PolicyParams":
        named = load_approximators(text)
        actors = [net for name, net in named if name.startswith("actor_")]
        critic = dict(named)["critic"]
        return cls(actors, critic)

    def flat(self) -> np.ndarray:
        parts = [a.flat() for a in self.actors if a is not None] + [self.critic.flat()]
        return np.concatenate(parts)


def init_params(env: MarlEnv, hp: Hyperparams, rng: np.random.Generator) -> PolicyParams:
    h = hp.hidden
    actors = []
    for view in env.layout.views:
        if view.n_actions == 0:
            actors.append(None)
        else:
            actors.append(Approximator.init([view.obs_dim, h, h, 3 * view.n_actions], rng, out_scale=0.01))
    critic = Approximator.init([env.layout.global_dim, h, h, env.n_agents], rng)
    return PolicyParams(actors, critic)


def _clip_by_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    norm = float(np.linalg.norm(grad))
    if max_norm > 0 and norm > max_norm:
        return grad * (max_norm / norm)
    return grad


def _log_probs(probs: np.ndarray, idx: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Sum of log-probabilities of taken actions over unmasked sensors, per row."""
    picked = np.take_along_axis(probs, idx[..., None], axis=-1)[..., 0]
    return np.where(mask, np.log(np.maximum(picked, 1e-300)), 0.0).sum(axis=-1)


def actor_gradient(actor: Approximator, obs: np.ndarray, idx: np.ndarray, mask: np.ndarray,
                   logp_old: np.ndarray, adv: np.ndarray, eps: float, ent_coef: float = 0.0):
    """Loss and flat parameter gradient of the clipped surrogate (plus entropy bonus)."""
    logits, cache = actor.forward_cache(obs)
    probs = softmax3(logits)
    logp = _log_probs(probs, idx, mask)
    ratio = np.exp(logp - logp_old)
    loss, d_ratio = actor_loss(ratio, adv, eps)
    d_logp = d_ratio * ratio
    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, idx[..., None], 1.0, axis=-1)
    d_logits = d_logp[:, None, None] * mask[..., None] * (onehot - probs)
    if ent_coef:
        logp_all = np.log(np.maximum(probs, 1e-300))
        ent = -(probs * logp_all).sum(axis=-1, keepdims=True)
        n = obs.shape[0]
        loss -= ent_coef * float((ent[..., 0] * mask).sum()) / n
        d_logits += ent_coef / n * mask[..., None] * probs * (logp_all + ent)
    dWs, dbs = actor.backward(cache, d_logits.reshape(logits.shape))
    return loss, Approximator.flat_grads(dWs, dbs)


def critic_gradient(critic: Approximator, states: np.ndarray, targets: np.ndarray):
    """Mean (over rows) summed squared error and its flat gradient."""
    values, cache = critic.forward_cache(states)
    loss, d_values = critic_loss(targets, values)
    n = states.shape[0]
    dWs, dbs = critic.backward(cache, d_values / n)
    return loss / n, Approximator.flat_grads(dWs, dbs)


@dataclass
class EpisodeRecord:
    episode: int
    mean_reward: float
    loss_actor: float
    loss_critic: float
    slots: int


@dataclass
class TrainLog:
    episodes: list[EpisodeRecord] = field(default_factory=list)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([e.mean_reward for e in self.episodes])


class _Buffer:
    def __init__(self, n_agents: int):
        self.n_agents = n_agents
        self.clear()

    def clear(self):
        self.obs = [[] for _ in range(self.n_agents)]
        self.idx = [[] for _ in range(self.n_agents)]
        self.mask = [[] for _ in range(self.n_agents)]
        self.logp = [[] for _ in range(self.n_agents)]
        self.states, self.rewards, self.dones = [], [], []
        self.next_state = None

    def __len__(self):
        return len(self.rewards)


class Trainer:
    """Runs the rollout/update loop; ``step_max`` counts episodes."""

    def __init__(self, env: MarlEnv, hp: Hyperparams, seed: int):
        self.env = env
        self.hp = hp
        self.rng = np.random.default_rng(seed)
        self.params = init_params(env, hp, self.rng)
        self.buffer = _Buffer(env.n_agents)
        self.log = TrainLog()
        self._losses: list[tuple[float, float]] = []

    def act(self, obs_list, gates, greedy: bool = False):
        idx_list, logps = [], []
        for actor, obs, gate in zip(self.params.actors, obs_list, gates):
            if actor is None:
                idx_list.append(np.zeros(0, dtype=np.int64))
                logps.append(0.0)
                continue
            probs = softmax3(actor.forward(obs))
            idx = probs.argmax(axis=1) if greedy else sample_actions(probs, self.rng)
            idx = apply_gate(idx, gate)
            idx_list.append(idx)
            logps.append(float(_log_probs(probs, idx, gate)))
        return idx_list, logps

    def run_episode(self, episode: int) -> EpisodeRecord:
        env, buf = self.env, self.buffer
        env.reset()
        rewards = []
        self._losses = []
        done = False
        while not done:
            obs = env.observations()
            gates = env.gates()
            g = env.global_state()
            idx, logps = self.act(obs, gates)
            _, metrics, done = env.step(idx)
            for a in range(env.n_agents):
                buf.obs[a].append(obs[a])
                buf.idx[a].append(idx[a])
                buf.mask[a].append(gates[a])
                buf.logp[a].append(logps[a])
            buf.states.append(g)
            buf.rewards.append(metrics.agent_rewards)
            buf.dones.append(done)
            buf.next_state = env.global_state()
            rewards.append(metrics.reward)
            if len(buf) >= self.hp.batch_size:
                self.update()
        la = float(np.mean([l[0] for l in self._losses])) if self._losses else 0.0
        lc = float(np.mean([l[1] for l in self._losses])) if self._losses else 0.0
        return EpisodeRecord(episode, float(np.mean(rewards)), la, lc, len(rewards))

    def update(self) -> None:
        hp, buf, p = self.hp, self.buffer, self.params
        states = np.array(buf.states)
        rewards = np.array(buf.rewards)
        dones = np.array(buf.dones, dtype=float)
        values = p.critic.forward(states)
        boot = np.zeros((1, self.env.n_agents)) if buf.dones[-1] else p.critic.forward(buf.next_state)[None]
        adv = gae(rewards, np.vstack([values, boot]), hp.gamma, hp.lam, dones)
        targets = returns(adv, values)
        old = p.copy()  # frozen behaviour policy for every epoch of this update
        per_agent = []
        for a, actor in enumerate(old.actors):
            if actor is None:
                per_agent.append(None)
                continue
            obs = np.array(buf.obs[a])
            idx = np.array(buf.idx[a])
            mask = np.array(buf.mask[a])
            logp_old = _log_probs(softmax3(actor.forward(obs)), idx, mask)
            A = adv[:, a]
            A = (A - A.mean()) / (A.std() + 1e-8)
            per_agent.append((obs, idx, mask, logp_old, A))
        la_total = lc_total = 0.0
        for _ in range(hp.epochs):
            la_total = 0.0
            for a, data in enumerate(per_agent):
                if data is None:
                    continue
                actor = p.actors[a]
                loss, grad = actor_gradient(actor, *data, hp.clip, hp.ent_coef)
                if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                    raise DivergedLoss(f"actor {a} loss became {loss}")
                actor.set_flat(actor.flat() - hp.lr * _clip_by_norm(grad, hp.grad_clip))
                la_total += loss
            lc_total, grad = critic_gradient(p.critic, states, targets)
            if not np.isfinite(lc_total) or not np.all(np.isfinite(grad)):
                raise DivergedLoss(f"critic loss became {lc_total}")
            p.critic.set_flat(p.critic.flat() - hp.lr * _clip_by_norm(grad, hp.grad_clip))
        self._losses.append((la_total, lc_total))
        buf.clear()

    def train(self) -> tuple[PolicyParams, TrainLog]:
        for ep in range(self.hp.step_max):
            rec = self.run_episode(ep)
            self.log.episodes.append(rec)
            log.debug("episode %d reward %.4f", ep, rec.mean_reward)
        return self.params, self.log


def train(env: MarlEnv, hp: Hyperparams, seed: int) -> tuple[PolicyParams, TrainLog]:
    """Train actors and critic on ``env`` for ``hp.step_max`` episodes."""
    return Trainer(env, hp, seed).train()
