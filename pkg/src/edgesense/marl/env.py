"""Multi-agent view of the simulator used for rollouts and deployment."""

from __future__ import annotations

import numpy as np

from ..energy import LinkSelection
from ..sim import Decision, EdgeSim, SimState, SlotMetrics
from .agents import KEEP, AgentLayout, to_deltas, weak_agent_gate


class MarlEnv:
    """Episodic wrapper: per-agent observations in, per-agent rewards out.

    An episode ends when coverage is irrecoverably lost or after
    ``horizon`` slots.
    """

    def __init__(self, sim: EdgeSim, horizon: int, *, staged: bool = True):
        self.sim = sim
        self.horizon = int(horizon)
        self.staged = staged
        self.layout = AgentLayout(sim)
        self.layout.horizon = self.horizon
        hp = sim.config.marl
        self.weak_threshold = hp.weak_threshold
        self.rescue_soc = hp.rescue_soc
        self.state: SimState | None = None

    @property
    def n_agents(self) -> int:
        return self.layout.n_agents

    def reset(self) -> SimState:
        self.state = self.sim.initial_state()
        return self.state

    def observations(self, state: SimState | None = None) -> list[np.ndarray]:
        return self.layout.observe_all(self.state if state is None else state)

    def global_state(self, state: SimState | None = None) -> np.ndarray:
        return self.layout.global_state(self.state if state is None else state)

    def gates(self, state: SimState | None = None) -> list[np.ndarray]:
        """Per agent, which controlled sensors may move this slot."""
        state = self.state if state is None else state
        top = self.sim.topology
        sensor_soc = state.soc[top.owner]
        sensor_alive = top.sensor_alive(state.alive)
        return [
            weak_agent_gate(state.server_loads[v.server], self.weak_threshold, v.sensors,
                            sensor_soc, top.neighbors, self.rescue_soc, sensor_alive)
            for v in self.layout.views
        ]

    def decision(self, action_idx: list[np.ndarray], selection: LinkSelection | None = None) -> Decision:
        """Turn per-agent (decrease/keep/increase) indices into a simulator decision."""
        deltas = np.zeros(self.sim.n_sensors, dtype=np.int64)
        for view, idx in zip(self.layout.views, action_idx):
            if view.n_actions:
                deltas[view.sensors] = to_deltas(idx)
        return Decision(actions=deltas, selection=selection or self.sim.selection,
                        dedup="staged" if self.staged else "none", agent_overhead=True)

    def step(self, action_idx: list[np.ndarray]) -> tuple[SimState, SlotMetrics, bool]:
        self.state, metrics = self.sim.step(self.state, self.decision(action_idx))
        done = self.state.slot >= self.horizon or self.sim.coverage_lost(self.state)
        return self.state, metrics, done


def apply_gate(action_idx: np.ndarray, gate: np.ndarray) -> np.ndarray:
    out = np.array(action_idx, copy=True)
    out[~gate] = KEEP
    return out
