"""Per-server agents: what each one observes, controls and may adjust."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .approx import Approximator
from .objectives import softmax3

DECREASE, KEEP, INCREASE = 0, 1, 2


@dataclass(frozen=True)
class AgentView:
    server: int
    sensors: np.ndarray   # adjustable sensors this agent controls
    devices: np.ndarray   # devices whose primary link is this server

    @property
    def n_actions(self) -> int:
        return len(self.sensors)

    @property
    def obs_dim(self) -> int:
        return len(self.sensors) + 2 * len(self.devices) + 3


class AgentLayout:
    """Splits a simulator's entities among one agent per edge server."""

    def __init__(self, sim):
        self.sim = sim
        top = sim.topology
        self.horizon = 1
        dev_agent = top.agent_of_device
        self.views = []
        for j in range(sim.n_servers):
            sensors = np.flatnonzero(top.adjustable & (sim.sensor_agent == j))
            devices = np.flatnonzero(dev_agent == j)
            self.views.append(AgentView(j, sensors, devices))
        self.inv_r_max = 1.0 / top.r_max

    @property
    def n_agents(self) -> int:
        return len(self.views)

    @property
    def global_dim(self) -> int:
        return self.sim.n_sensors + 2 * self.sim.n_devices + self.sim.n_servers + 2

    def _slot_frac(self, state) -> float:
        return min(state.slot / max(self.horizon, 1), 1.0)

    def observe(self, state, view: AgentView) -> np.ndarray:
        """Radii of controlled sensors over r_max, device SoC and loads, own
        server load, current coverage and elapsed fraction of the episode."""
        return np.concatenate([
            state.radii[view.sensors] * self.inv_r_max[view.sensors],
            state.soc[view.devices],
            state.device_loads[view.devices],
            [state.server_loads[view.server], state.coverage, self._slot_frac(state)],
        ])

    def observe_all(self, state) -> list[np.ndarray]:
        return [self.observe(state, v) for v in self.views]

    def global_state(self, state) -> np.ndarray:
        return np.concatenate([
            state.radii * self.inv_r_max, state.soc, state.device_loads, state.server_loads,
            [state.coverage, self._slot_frac(state)],
        ])


def weak_agent_gate(server_load: float, threshold: float, controlled: np.ndarray,
                    sensor_soc: np.ndarray, neighbors: np.ndarray, rescue_soc: float,
                    sensor_alive: np.ndarray | None = None) -> np.ndarray:
    """Which controlled sensors the agent may adjust this slot.

    Below the load threshold the agent is strong and adjusts everything.
    Above it the agent is weak: only sensors neighboring a sensor of a dying
    device (SoC under ``rescue_soc``) stay adjustable, so they can take over.
    """
    controlled = np.asarray(controlled, dtype=np.int64)
    if server_load <= threshold:
        return np.ones(len(controlled), dtype=bool)
    sensor_soc = np.asarray(sensor_soc, dtype=float)
    dying = sensor_soc < rescue_soc
    if sensor_alive is not None:
        dying &= np.asarray(sensor_alive, dtype=bool)
    if not dying.any():
        return np.zeros(len(controlled), dtype=bool)
    rescuers = np.asarray(neighbors, dtype=bool)[:, dying].any(axis=1) & ~dying
    return rescuers[controlled]


def policy_distribution(actor: Approximator, obs) -> np.ndarray:
    """Per controlled sensor, probabilities of (decrease, keep, increase)."""
    return softmax3(actor.forward(obs))


def sample_actions(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(probs.shape[0])
    cdf = np.cumsum(probs, axis=1)
    return np.minimum((u[:, None] > cdf).sum(axis=1), 2)


def to_deltas(action_idx: np.ndarray) -> np.ndarray:
    return np.asarray(action_idx, dtype=np.int64) - 1
