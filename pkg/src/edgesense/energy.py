"""Per-slot energy accounting: sensing, three transmission legs, compute, battery drain.

Sensor current follows ``SW(R) = a + b * R**2`` (idle draw plus a term
proportional to the sensed area). Every transmission leg costs
``bytes / rate * power``; the one-hot link selection collapses the
rate/power matrices to the selected link.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import BrokenPath, LinkNotOwned, MissingLink, RadiusOutOfRange
from .netmodel import BatteryState, ControlDevice, EdgeServer, Sensor, Topology

Hop = tuple[int, int]


@dataclass(frozen=True)
class EnergyBreakdown:
    sensing_J: float = 0.0
    tran1_J: float = 0.0
    comp_J: float = 0.0
    tran2_J: float = 0.0
    tran3_J: float = 0.0

    @property
    def total_J(self) -> float:
        return self.sensing_J + self.tran1_J + self.comp_J + self.tran2_J + self.tran3_J

    def __add__(self, other: "EnergyBreakdown") -> "EnergyBreakdown":
        return EnergyBreakdown(*(a + b for a, b in zip(self.as_tuple(), other.as_tuple())))

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.sensing_J, self.tran1_J, self.comp_J, self.tran2_J, self.tran3_J)


@dataclass(frozen=True)
class LinkSelection:
    """Where each sensor's datum goes.

    ``device_to_server[i]`` is the server receiving sensor ``i``'s data from
    its owner device, or -1 when the datum is suppressed. ``server_to_hub[j]``
    is the hop path from server ``j`` to the hub (empty for the hub itself).
    """

    device_to_server: np.ndarray
    server_to_hub: tuple[tuple[Hop, ...], ...]

    def server_of(self, sensor: int) -> int | None:
        j = int(self.device_to_server[sensor])
        return None if j < 0 else j


@dataclass
class SlotTraffic:
    """Bytes moved on each leg during one slot.

    Per sensor: ``sensed`` (sensor to device), ``formatted`` (compute on the
    device or, when ``offloaded``, on the server), ``sent`` (device to
    server). Per server: ``forwarded`` (server to hub).
    """

    sensed: np.ndarray
    formatted: np.ndarray
    sent: np.ndarray
    forwarded: np.ndarray
    offloaded: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.offloaded is None:
            self.offloaded = np.zeros(len(self.sensed), dtype=bool)


@dataclass(frozen=True)
class SlotAccount:
    breakdown: EnergyBreakdown
    device_J: np.ndarray
    server_J: np.ndarray
    sensor_J: np.ndarray


# -- single-term ops ----------------------------------------------------------------

def sensor_current(sensor: Sensor, radius: float) -> float:
    a, b = sensor.current_law
    return a + b * radius * radius


def sensing_energy(sensor: Sensor, radius: float, slot_s: float) -> float:
    if not 0.0 <= radius <= sensor.r_max:
        raise RadiusOutOfRange(f"radius {radius} outside [0, {sensor.r_max}]")
    if slot_s <= 0:
        raise ValueError("slot_s must be positive")
    return sensor_current(sensor, radius) * sensor.voltage_U * slot_s


def tran1_energy(sensor: Sensor, data_bytes: float) -> float:
    if sensor.owner_device is None or sensor.owner_device < 0 or sensor.link_rate_B1 <= 0:
        raise MissingLink(f"sensor {sensor.id} has no usable link to a control device")
    return data_bytes / sensor.link_rate_B1 * sensor.link_power_P1


def comp_energy(data_bytes: float, f_comp: float, k: float) -> float:
    return k * data_bytes * f_comp * f_comp


def tran2_energy(device: ControlDevice, server: int | None, data_bytes: float,
                 slot_s: float = 1.0) -> float:
    """Device-to-server leg for one datum; ``server=None`` means suppressed.

    ``slot_s`` is accepted for signature symmetry only: transfer time
    ``bytes / rate`` already carries the duration.
    """
    if server is None or server < 0:
        return 0.0
    link = device.link_to(server)
    if link is None:
        raise LinkNotOwned(f"device {device.id} has no link to server {server}")
    return data_bytes / link.rate * link.power


def tran3_energy(path: Sequence[Hop], data_bytes: float, servers: Sequence[EdgeServer]) -> float:
    total = 0.0
    prev_end = None
    for a, b in path:
        if prev_end is not None and a != prev_end:
            raise BrokenPath(f"hop ({a}, {b}) does not start at {prev_end}")
        if not 0 <= a < len(servers):
            raise BrokenPath(f"unknown server {a}")
        link = servers[a].link_to(b)
        if link is None:
            raise BrokenPath(f"no peer link {a} -> {b}")
        total += data_bytes / link.rate * link.power
        prev_end = b
    return total


def drain_battery(battery: BatteryState, spent_J: float) -> BatteryState:
    """Release ``spent_J`` from the battery; crossing ``soc_min`` marks it dead."""
    if spent_J < 0:
        raise ValueError("spent_J must be non-negative")
    if battery.dead or spent_J == 0:
        return battery
    soc = battery.soc - spent_J / (battery.soe * battery.capacity_J)
    if soc < battery.soc_min:
        return replace(battery, soc=battery.soc_min, dod=1.0 - battery.soc_min, dead=True)
    return replace(battery, soc=soc, dod=1.0 - soc)


# -- whole-slot accounting --------------------------------------------------------------

def hub_paths(topology: Topology) -> tuple[tuple[Hop, ...], ...]:
    """Direct one-hop path from each server to the hub."""
    return tuple(() if j == topology.hub else ((j, topology.hub),) for j in range(len(topology.servers)))


def default_selection(topology: Topology) -> LinkSelection:
    """Each datum goes over the owner's cheapest link (lowest joules per byte)."""
    choice = []
    for d in topology.devices:
        best = min(d.server_links, key=lambda l: (l.power / l.rate, l.server))
        choice.append(best.server)
    per_sensor = np.array([choice[o] for o in topology.owner], dtype=np.int64)
    return LinkSelection(per_sensor, hub_paths(topology))


def plain_traffic(topology: Topology, radii, alive, selection: LinkSelection) -> SlotTraffic:
    """Traffic with no redundancy elimination: everything sensed is sent and forwarded."""
    sensed = (topology.masks(radii, alive).sum(axis=1) *
              np.array([s.bytes_per_cell for s in topology.sensors]))
    sent = np.where(selection.device_to_server >= 0, sensed, 0.0)
    forwarded = np.bincount(selection.device_to_server[selection.device_to_server >= 0],
                            weights=sent[selection.device_to_server >= 0],
                            minlength=len(topology.servers)).astype(float)
    return SlotTraffic(sensed=sensed, formatted=sensed.copy(), sent=sent, forwarded=forwarded)


class _LinkTables:
    """Dense per-sensor and per-server link parameters, cached per topology."""

    def __init__(self, topology: Topology):
        sensors = topology.sensors
        self.a = np.array([s.current_law[0] for s in sensors], dtype=float)
        self.b = np.array([s.current_law[1] for s in sensors], dtype=float)
        self.U = np.array([s.voltage_U for s in sensors], dtype=float)
        self.B1 = np.array([s.link_rate_B1 for s in sensors], dtype=float)
        self.P1 = np.array([s.link_power_P1 for s in sensors], dtype=float)
        dev = topology.devices
        self.kf2 = np.array([d.energy_factor_k * d.compute_freq_f ** 2 for d in dev], dtype=float)
        n_srv = len(topology.servers)
        self.B2 = np.full((len(dev), n_srv), np.nan)
        self.P2 = np.full((len(dev), n_srv), np.nan)
        for d in dev:
            for link in d.server_links:
                self.B2[d.id, link.server] = link.rate
                self.P2[d.id, link.server] = link.power


def _tables(topology: Topology) -> _LinkTables:
    cached = topology.__dict__.get("_energy_tables")
    if cached is None:
        cached = _LinkTables(topology)
        topology.__dict__["_energy_tables"] = cached
    return cached


def account_slot(topology: Topology, alive, radii, selection: LinkSelection, slot_s: float,
                 traffic: SlotTraffic | None = None) -> SlotAccount:
    """Energy of one slot, split by term, by device battery and by server.

    Sensors of dead devices contribute nothing. A device's battery pays for
    its sensors' sensing, the sensor-to-device leg, local formatting (unless
    offloaded) and the device-to-server leg. Servers pay for offloaded
    formatting and the server-to-hub leg.
    """
    radii = np.asarray(radii, dtype=float)
    alive = np.asarray(alive, dtype=bool)
    if np.any(radii < 0) or np.any(radii > topology.r_max + 1e-12):
        raise RadiusOutOfRange("a radius lies outside [0, r_max]")
    if traffic is None:
        traffic = plain_traffic(topology, radii, alive, selection)
    tb = _tables(topology)
    owner = topology.owner
    live = alive[owner]

    sensing = np.where(live, (tb.a + tb.b * radii * radii) * tb.U * slot_s, 0.0)
    tran1 = np.where(live, traffic.sensed / tb.B1 * tb.P1, 0.0)
    comp = np.where(live, traffic.formatted * tb.kf2[owner], 0.0)

    dest = selection.device_to_server
    routed = live & (dest >= 0)
    if np.any(routed & np.isnan(tb.B2[owner, np.maximum(dest, 0)])):
        bad = int(np.flatnonzero(routed & np.isnan(tb.B2[owner, np.maximum(dest, 0)]))[0])
        raise LinkNotOwned(f"device {owner[bad]} has no link to server {dest[bad]}")
    safe = np.maximum(dest, 0)
    tran2 = np.zeros(len(radii))
    if np.any(routed):
        tran2[routed] = (traffic.sent[routed] / tb.B2[owner[routed], safe[routed]]
                         * tb.P2[owner[routed], safe[routed]])

    n_srv = len(topology.servers)
    tran3 = np.zeros(n_srv)
    for j in range(n_srv):
        if traffic.forwarded[j] > 0:
            tran3[j] = tran3_energy(selection.server_to_hub[j], traffic.forwarded[j], topology.servers)

    device_part = sensing + tran1 + tran2 + np.where(traffic.offloaded, 0.0, comp)
    device_J = np.bincount(owner, weights=device_part, minlength=len(topology.devices)) \
        if len(owner) else np.zeros(len(topology.devices))
    server_J = tran3.copy()
    if np.any(traffic.offloaded & live):
        off = traffic.offloaded & live
        server_J += np.bincount(np.maximum(dest[off], 0), weights=comp[off], minlength=n_srv)

    breakdown = EnergyBreakdown(
        sensing_J=float(sensing.sum()), tran1_J=float(tran1.sum()), comp_J=float(comp.sum()),
        tran2_J=float(tran2.sum()), tran3_J=float(tran3.sum()),
    )
    return SlotAccount(breakdown=breakdown, device_J=device_J, server_J=server_J,
                       sensor_J=sensing + tran1 + comp + tran2)


def total_slot_energy(topology: Topology, alive, radii, selection: LinkSelection, slot_s: float,
                      traffic: SlotTraffic | None = None) -> EnergyBreakdown:
    return account_slot(topology, alive, radii, selection, slot_s, traffic).breakdown
