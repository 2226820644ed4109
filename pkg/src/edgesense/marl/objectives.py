"""Advantage estimation, returns, reward and the two training losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import LengthMismatch


def softmax3(logits: np.ndarray) -> np.ndarray:
    """Softmax over the last axis, which must have length 3 after reshaping."""
    z = np.asarray(logits, dtype=float)
    z = z.reshape(z.shape[:-1] + (-1, 3))
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def gae(rewards, values, gamma: float, lam: float, dones=None) -> np.ndarray:
    """Generalized advantage estimates.

    ``values`` has one more entry than ``rewards``: the last one bootstraps
    the state after the final reward. ``dones[t]`` cuts the recursion after
    step ``t`` (the following value is treated as zero).
    """
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != rewards.shape[0] + 1:
        raise LengthMismatch(f"need len(values) == len(rewards) + 1, got {len(values)} and {len(rewards)}")
    T = rewards.shape[0]
    notdone = np.ones(T) if dones is None else 1.0 - np.asarray(dones, dtype=float)
    if notdone.shape[0] != T:
        raise LengthMismatch("dones must match rewards")
    adv = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0]) if T else 0.0
    for t in range(T - 1, -1, -1):
        nd = notdone[t]
        delta = rewards[t] + gamma * values[t + 1] * nd - values[t]
        running = delta + gamma * lam * nd * running
        adv[t] = running
    return adv


def returns(advantages, values) -> np.ndarray:
    """Critic targets ``A + V`` (values without the bootstrap entry)."""
    advantages = np.asarray(advantages, dtype=float)
    values = np.asarray(values, dtype=float)
    if advantages.shape != values.shape:
        raise LengthMismatch("advantages and values must have the same length")
    return advantages + values


@dataclass(frozen=True)
class RewardTerms:
    energy: float
    load: float
    alive: float
    coverage_gap: float


def reward(total_J: float, server_load: float, alive_count: int, device_count: int,
           coverage: float, weights, *, energy_scale: float = 1.0,
           coverage_target: float = 0.95) -> float:
    """Per-slot reward: cheap slots, light servers, alive devices, enough coverage.

    ``weights`` carries ``w_energy``, ``w_load``, ``w_alive``, ``w_coverage``.
    """
    terms = RewardTerms(
        energy=total_J / energy_scale,
        load=server_load,
        alive=alive_count / device_count if device_count else 0.0,
        coverage_gap=max(0.0, coverage_target - coverage),
    )
    return (-weights.w_energy * terms.energy - weights.w_load * terms.load
            + weights.w_alive * terms.alive - weights.w_coverage * terms.coverage_gap)


def critic_loss(G, V) -> tuple[float, np.ndarray]:
    """Summed squared error and its gradient with respect to ``V``."""
    G = np.asarray(G, dtype=float)
    V = np.asarray(V, dtype=float)
    if G.shape != V.shape:
        raise LengthMismatch("G and V must have the same shape")
    diff = G - V
    return float(np.sum(diff * diff)), -2.0 * diff


def clipped_terms(ratios, advantages, eps: float) -> np.ndarray:
    r = np.asarray(ratios, dtype=float)
    A = np.asarray(advantages, dtype=float)
    return np.minimum(r * A, np.clip(r, 1.0 - eps, 1.0 + eps) * A)


def actor_loss(ratios, advantages, eps: float) -> tuple[float, np.ndarray]:
    """Negated clipped surrogate (to minimize) and its gradient w.r.t. ratios.

    The gradient vanishes wherever the clipped branch is the active minimum
    and the ratio lies outside ``[1 - eps, 1 + eps]``.
    """
    r = np.asarray(ratios, dtype=float)
    A = np.asarray(advantages, dtype=float)
    if r.shape != A.shape:
        raise LengthMismatch("ratios and advantages must have the same shape")
    n = r.size
    if n == 0:
        return 0.0, np.zeros(0)
    terms = clipped_terms(r, A, eps)
    outside = (r < 1.0 - eps) | (r > 1.0 + eps)
    clipped_active = outside & (np.clip(r, 1.0 - eps, 1.0 + eps) * A < r * A)
    grad = np.where(clipped_active, 0.0, -A / n)
    return float(-terms.mean()), grad
