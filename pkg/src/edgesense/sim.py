"""Discrete-time engine: one slot of sensing, forwarding, accounting and drain.

A slot runs in a fixed order: apply radius actions, sense, forward device
data (adjustable sensors first, then fixed sensors through staged
transmission when the policy dedups), optional hash dedup at the edge tier,
hub aggregation, energy accounting, battery drain, then death and load
updates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig
from .dedup import first_arrivals, partition, staged_transmit
from .energy import (EnergyBreakdown, LinkSelection, SlotTraffic, account_slot, default_selection,
                     drain_battery)
from .marl.objectives import reward as reward_fn
from .netmodel import BatteryState, Topology, coverage_fraction

DEDUP_MODES = ("staged", "none", "hash")


class EndReason(str, enum.Enum):
    COVERAGE_LOST = "CoverageLost"
    HORIZON_REACHED = "HorizonReached"


@dataclass
class SimState:
    slot: int
    radii: np.ndarray
    batteries: list[BatteryState]
    alive: np.ndarray
    device_loads: np.ndarray
    server_loads: np.ndarray
    region_complete: np.ndarray
    coverage: float = 0.0

    @property
    def soc(self) -> np.ndarray:
        return np.array([b.soc for b in self.batteries])

    def copy(self) -> "SimState":
        return SimState(self.slot, self.radii.copy(), list(self.batteries), self.alive.copy(),
                        self.device_loads.copy(), self.server_loads.copy(),
                        self.region_complete.copy(), self.coverage)


@dataclass
class Decision:
    """What a policy wants done in one slot.

    ``actions`` holds -1/0/+1 radius steps per sensor (ignored for fixed
    sensors); ``offload`` marks devices whose formatting runs on the server.
    """

    actions: np.ndarray
    selection: LinkSelection
    dedup: str = "none"
    offload: np.ndarray | None = None
    agent_overhead: bool = False


@dataclass
class SlotMetrics:
    slot: int
    breakdown: EnergyBreakdown
    device_J: np.ndarray
    server_J: np.ndarray
    coverage: float
    dup_rate_device: float
    dup_rate_server: float
    soc: np.ndarray
    alive: np.ndarray
    radii: np.ndarray
    sent_bytes: float
    agent_rewards: np.ndarray
    agent_energy_J: np.ndarray

    @property
    def reward(self) -> float:
        return float(self.agent_rewards.mean()) if len(self.agent_rewards) else 0.0


@dataclass
class EpisodeLog:
    policy: str
    horizon: int
    slots: list[SlotMetrics] = field(default_factory=list)
    end_slot: int = 0
    end_reason: EndReason = EndReason.HORIZON_REACHED

    @property
    def rewards(self) -> np.ndarray:
        return np.array([m.reward for m in self.slots])

    @property
    def censored(self) -> bool:
        return self.end_reason is EndReason.HORIZON_REACHED


def _dup(counts: np.ndarray) -> float:
    total = int(counts.sum())
    return 0.0 if total == 0 else (total - int(np.count_nonzero(counts))) / total


class EdgeSim:
    """Slot engine bound to one topology and configuration."""

    def __init__(self, topology: Topology, config: SimConfig):
        self.topology = topology
        self.config = config
        self.slot_s = config.energy.slot_s
        self.radius_step = config.marl.radius_step
        self.coverage_target = topology.coverage_target
        top = topology
        self.n_sensors = len(top.sensors)
        self.n_devices = len(top.devices)
        self.n_servers = len(top.servers)
        self.bytes_per_cell = np.array([s.bytes_per_cell for s in top.sensors], dtype=float)
        self.partitions = {
            s.id: partition(s, top.grid, l2=config.dedup.l2_override or None)
            for s in top.sensors if not s.adjustable
        }
        self.selection = default_selection(top)
        full_bytes = top.full_masks.sum(axis=1) * self.bytes_per_cell
        self.device_max_bytes = np.bincount(top.owner, weights=full_bytes, minlength=self.n_devices)
        self.server_capacity = np.array([e.compute_capacity_EC for e in top.servers])
        # agents are servers; a sensor belongs to the agent of its owner's primary link
        self.sensor_agent = top.agent_of_device[top.owner] if self.n_sensors else np.zeros(0, int)
        ref = account_slot(top, np.ones(self.n_devices, bool), top.r_max, self.selection, self.slot_s)
        self.agent_energy_scale = np.maximum(self._per_agent(ref.sensor_J, ref.server_J), 1e-9)

    # -- state --------------------------------------------------------------------
    def initial_state(self) -> SimState:
        top = self.topology
        return SimState(
            slot=0,
            radii=top.r_max.copy(),
            batteries=[d.battery for d in top.devices],
            alive=np.array([not d.battery.dead for d in top.devices], dtype=bool),
            device_loads=np.zeros(self.n_devices),
            server_loads=np.zeros(self.n_servers),
            region_complete=np.zeros(top.grid.n_cells, dtype=bool),
            coverage=coverage_fraction(top, top.r_max, [not d.battery.dead for d in top.devices]),
        )

    def _per_agent(self, sensor_J: np.ndarray, server_J: np.ndarray) -> np.ndarray:
        per = np.bincount(self.sensor_agent, weights=sensor_J, minlength=self.n_servers) \
            if self.n_sensors else np.zeros(self.n_servers)
        return per + server_J

    def apply_actions(self, radii: np.ndarray, actions: np.ndarray) -> np.ndarray:
        top = self.topology
        out = radii.astype(float).copy()
        adj = top.adjustable
        out[adj] = np.clip(out[adj] + np.asarray(actions)[adj] * self.radius_step, 0.0, top.r_max[adj])
        out[~adj] = top.r_max[~adj]
        return out

    def rescue_feasible(self, alive) -> bool:
        return coverage_fraction(self.topology, self.topology.r_max, alive) >= self.coverage_target

    # -- one slot -------------------------------------------------------------------
    def step(self, state: SimState, decision: Decision) -> tuple[SimState, SlotMetrics]:
        if decision.dedup not in DEDUP_MODES:
            raise ValueError(f"unknown dedup mode {decision.dedup!r}")
        top, cfg = self.topology, self.config
        radii = self.apply_actions(state.radii, decision.actions)
        alive = state.alive
        live = top.sensor_alive(alive)
        masks = top.masks(radii, alive)
        sensed = masks.sum(axis=1) * self.bytes_per_cell

        dest = decision.selection.device_to_server
        routed = live & (dest >= 0)
        emitted = masks & routed[:, None]
        if decision.dedup == "staged":
            held = emitted[top.adjustable].any(axis=0)
            for i in np.flatnonzero(~top.adjustable & routed):
                row = np.zeros(top.grid.n_cells, dtype=bool)
                for batch in staged_transmit(self.partitions[int(i)], held):
                    row[batch.cells] = True
                emitted[i] = row
                held |= row
        else:
            held = emitted.any(axis=0)

        formatted = emitted.sum(axis=1) * self.bytes_per_cell
        offloaded = np.zeros(self.n_sensors, dtype=bool)
        if decision.offload is not None:
            offloaded = np.asarray(decision.offload, dtype=bool)[top.owner] & routed
        sent = np.where(offloaded, formatted * cfg.baselines.raw_inflation, formatted)

        stored = emitted
        scale = 1.0
        if decision.dedup == "hash":
            order = np.flatnonzero(routed)
            keep = first_arrivals([np.flatnonzero(emitted[i]) for i in order], slot=state.slot)
            stored = np.zeros_like(emitted)
            for i, k in zip(order, keep):
                stored[i, np.flatnonzero(emitted[i])[k]] = True
            scale = cfg.baselines.compression_ratio
        stored_bytes = stored.sum(axis=1) * self.bytes_per_cell
        safe_dest = np.maximum(dest, 0)
        forwarded = np.bincount(safe_dest[routed], weights=stored_bytes[routed] * scale,
                                minlength=self.n_servers).astype(float)
        received = np.bincount(safe_dest[routed], weights=sent[routed], minlength=self.n_servers)

        traffic = SlotTraffic(sensed=sensed, formatted=formatted, sent=sent,
                              forwarded=forwarded, offloaded=offloaded)
        acct = account_slot(top, alive, radii, decision.selection, self.slot_s, traffic)
        server_J = acct.server_J.copy()
        if decision.agent_overhead:
            server_J += cfg.baselines.inference_J

        batteries = list(state.batteries)
        new_alive = alive.copy()
        for n in np.flatnonzero(alive):
            batteries[n] = drain_battery(batteries[n], float(acct.device_J[n]))
            if batteries[n].dead:
                new_alive[n] = False

        device_bytes = np.bincount(top.owner, weights=sensed, minlength=self.n_devices)
        with np.errstate(invalid="ignore", divide="ignore"):
            device_loads = np.where(self.device_max_bytes > 0, device_bytes / self.device_max_bytes, 0.0)
        server_loads = received / self.server_capacity
        if decision.agent_overhead:
            server_loads = server_loads + cfg.baselines.inference_load
        device_loads = np.clip(device_loads, 0.0, 1.0)
        server_loads = np.clip(server_loads, 0.0, 1.0)

        coverage = int(np.count_nonzero(masks.any(axis=0))) / top.grid.n_cells
        agent_J = self._per_agent(acct.sensor_J, server_J)
        alive_count = int(new_alive.sum())
        rewards = np.array([
            reward_fn(agent_J[j], server_loads[j], alive_count, self.n_devices, coverage,
                      cfg.reward, energy_scale=self.agent_energy_scale[j],
                      coverage_target=self.coverage_target)
            for j in range(self.n_servers)
        ])

        after = coverage if np.array_equal(new_alive, alive) else \
            coverage_fraction(top, radii, new_alive)
        new_state = SimState(
            slot=state.slot + 1, radii=radii, batteries=batteries, alive=new_alive,
            device_loads=device_loads, server_loads=server_loads, region_complete=held,
            coverage=after,
        )
        metrics = SlotMetrics(
            slot=state.slot + 1, breakdown=acct.breakdown, device_J=acct.device_J,
            server_J=server_J, coverage=coverage,
            dup_rate_device=_dup(masks.sum(axis=0)), dup_rate_server=_dup(stored.sum(axis=0)),
            soc=new_state.soc, alive=new_alive.copy(), radii=radii.copy(),
            sent_bytes=float(sent.sum()), agent_rewards=rewards, agent_energy_J=agent_J,
        )
        return new_state, metrics

    def coverage_lost(self, state: SimState) -> bool:
        """Coverage below target and alive sensors at r_max cannot restore it."""
        if state.coverage >= self.coverage_target:
            return False
        return not self.rescue_feasible(state.alive)


def step(state: SimState, policy, sim: EdgeSim) -> tuple[SimState, SlotMetrics]:
    """Advance one slot under ``policy``."""
    return sim.step(state, policy.decide(sim, state))


def run_episode(policy, sim: EdgeSim, horizon: int, seed: int = 0) -> EpisodeLog:
    """Step until coverage is irrecoverably lost or ``horizon`` slots pass."""
    log = EpisodeLog(policy=getattr(policy, "kind", type(policy).__name__), horizon=horizon)
    state = sim.initial_state()
    policy.reset(sim, seed)
    for _ in range(horizon):
        state, metrics = step(state, policy, sim)
        log.slots.append(metrics)
        if sim.coverage_lost(state):
            log.end_slot = state.slot
            log.end_reason = EndReason.COVERAGE_LOST
            return log
    log.end_slot = horizon
    log.end_reason = EndReason.HORIZON_REACHED
    return log


def max_operational_duration(log: EpisodeLog) -> tuple[int, bool]:
    """``(slots, censored)``; censored runs report the horizon."""
    if log.end_reason is EndReason.COVERAGE_LOST:
        return log.end_slot, False
    return log.horizon, True


@dataclass
class Summary:
    policy: str
    slots: int
    end_reason: str
    max_operational_duration: int
    censored: bool
    total_J: float
    device_J: float
    server_J: float
    breakdown: dict
    mean_dup_rate_device: float
    mean_dup_rate_server: float
    mean_coverage: float
    mean_reward: float
    per_device_mean_J: list
    device_energy_std_J: float
    current_proxy_mean_A: float
    current_proxy_std_A: float
    soc_trajectories: list

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize(log: EpisodeLog, u_ref: float = 5.0, slot_s: float = 1.0,
              window: int | None = None) -> Summary:
    """Totals and means over the first ``window`` slots (all slots by default).

    The current proxy for a device is its per-slot energy over ``u_ref * slot_s``.
    """
    slots = log.slots if window is None else log.slots[:window]
    duration, censored = max_operational_duration(log)
    if not slots:
        return Summary(log.policy, 0, log.end_reason.value, duration, censored, 0.0, 0.0, 0.0,
                       dict(zip(("sensing_J", "tran1_J", "comp_J", "tran2_J", "tran3_J"), [0.0] * 5)),
                       0.0, 0.0, 0.0, 0.0, [], 0.0, 0.0, 0.0, [])
    total = EnergyBreakdown()
    for m in slots:
        total = total + m.breakdown
    device = np.array([m.device_J for m in slots])
    per_device_mean = device.mean(axis=0)
    current = per_device_mean / (u_ref * slot_s)
    return Summary(
        policy=log.policy,
        slots=len(slots),
        end_reason=log.end_reason.value,
        max_operational_duration=duration,
        censored=censored,
        total_J=float(sum(m.breakdown.total_J for m in slots)),
        device_J=float(device.sum()),
        server_J=float(sum(m.server_J.sum() for m in slots)),
        breakdown=dict(zip(("sensing_J", "tran1_J", "comp_J", "tran2_J", "tran3_J"), total.as_tuple())),
        mean_dup_rate_device=float(np.mean([m.dup_rate_device for m in slots])),
        mean_dup_rate_server=float(np.mean([m.dup_rate_server for m in slots])),
        mean_coverage=float(np.mean([m.coverage for m in slots])),
        mean_reward=float(np.mean([m.reward for m in slots])),
        per_device_mean_J=per_device_mean.tolist(),
        device_energy_std_J=float(per_device_mean.std()),
        current_proxy_mean_A=float(current.mean()),
        current_proxy_std_A=float(current.std()),
        soc_trajectories=np.array([m.soc for m in slots]).T.tolist(),
    )
