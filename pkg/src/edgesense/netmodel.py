"""Network entities, topology construction and grid coverage geometry.

The area is discretized into square cells; a sensor of radius ``r`` covers
every cell whose center lies within distance ``r`` of the sensor. All
coverage and duplication statistics are exact integer ratios over cells.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from .config import SimConfig
from .errors import InfeasibleCoverage, RadiusOutOfRange


class Link(NamedTuple):
    server: int
    rate: float
    power: float


@dataclass(frozen=True)
class BatteryState:
    """Battery as (SoE, SoC, DoD) fractions plus the absolute capacity.

    ``soc`` is a fraction of the effective capacity ``soe * capacity_J``.
    """

    soe: float
    soc: float
    dod: float
    capacity_J: float
    soc_min: float = 0.0
    soc_max: float = 1.0
    dead: bool = False

    def __post_init__(self):
        if not 0.0 <= self.soe <= 1.0:
            raise ValueError(f"soe out of [0, 1]: {self.soe}")
        if not 0.0 <= self.soc_min <= self.soc_max <= 1.0:
            raise ValueError("need 0 <= soc_min <= soc_max <= 1")
        if not self.soc_min - 1e-12 <= self.soc <= self.soc_max + 1e-12:
            raise ValueError(f"soc {self.soc} outside [{self.soc_min}, {self.soc_max}]")
        if abs(self.dod - (1.0 - self.soc)) > 1e-9:
            raise ValueError("dod must equal 1 - soc")
        if self.capacity_J <= 0:
            raise ValueError("capacity_J must be positive")

    @classmethod
    def charged(cls, capacity_J: float, soc: float = 1.0, soc_min: float = 0.0,
                soc_max: float = 1.0, soe: float = 1.0) -> "BatteryState":
        return cls(soe=soe, soc=soc, dod=1.0 - soc, capacity_J=capacity_J,
                   soc_min=soc_min, soc_max=soc_max)

    @property
    def stored_J(self) -> float:
        return self.soc * self.soe * self.capacity_J

    @property
    def headroom_J(self) -> float:
        """Energy that can still be released before hitting ``soc_min``."""
        return (self.soc - self.soc_min) * self.soe * self.capacity_J


@dataclass(frozen=True)
class Sensor:
    id: int
    position: tuple[float, float]
    r_max: float
    adjustable: bool
    voltage_U: float
    current_law: tuple[float, float]
    bytes_per_cell: float
    owner_device: int
    link_rate_B1: float
    link_power_P1: float
    fixed_L1: float = 0.0

    def __post_init__(self):
        if self.r_max <= 0:
            raise ValueError("r_max must be positive")
        if self.voltage_U <= 0 or self.bytes_per_cell <= 0:
            raise ValueError("voltage and bytes_per_cell must be positive")
        fixed_ok = 0.0 < self.fixed_L1 <= self.r_max
        if self.adjustable == fixed_ok:
            raise ValueError("a sensor is either adjustable or has fixed_L1 in (0, r_max]")


@dataclass(frozen=True)
class ControlDevice:
    id: int
    position: tuple[float, float]
    battery: BatteryState
    compute_freq_f: float
    energy_factor_k: float
    server_links: tuple[Link, ...]
    workload_W: float = 0.0
    W_min: float = 0.0
    W_max: float = 1.0

    def __post_init__(self):
        if not self.server_links:
            raise ValueError("a control device needs at least one server link")
        if not self.W_min <= self.workload_W <= self.W_max:
            raise ValueError("device workload outside its bounds")

    def link_to(self, server: int) -> Link | None:
        for link in self.server_links:
            if link.server == server:
                return link
        return None

    @property
    def primary_server(self) -> int:
        return self.server_links[0].server


@dataclass(frozen=True)
class EdgeServer:
    id: int
    compute_capacity_EC: float
    storage_capacity_ES: float
    peer_links: tuple[Link, ...] = ()
    workload_W: float = 0.0
    W_min: float = 0.0
    W_max: float = 1.0

    def __post_init__(self):
        if self.compute_capacity_EC <= 0 or self.storage_capacity_ES <= 0:
            raise ValueError("server capacities must be positive")
        if not self.W_min <= self.workload_W <= self.W_max:
            raise ValueError("server workload outside its bounds")

    def link_to(self, server: int) -> Link | None:
        for link in self.peer_links:
            if link.server == server:
                return link
        return None


@dataclass(frozen=True)
class AreaGrid:
    width: float
    height: float
    resolution: int = 1

    def __post_init__(self):
        if self.resolution < 1:
            raise ValueError("resolution must be >= 1")

    @property
    def nx(self) -> int:
        return int(round(self.width * self.resolution))

    @property
    def ny(self) -> int:
        return int(round(self.height * self.resolution))

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @cached_property
    def centers(self) -> np.ndarray:
        """(n_cells, 2) cell centers; cell index is ``iy * nx + ix``."""
        ix = (np.arange(self.nx) + 0.5) / self.resolution
        iy = (np.arange(self.ny) + 0.5) / self.resolution
        xx, yy = np.meshgrid(ix, iy)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def squared_distances(self, point) -> np.ndarray:
        dx = self.centers[:, 0] - point[0]
        dy = self.centers[:, 1] - point[1]
        return dx * dx + dy * dy

    def snap(self, point) -> tuple[float, float]:
        ix = min(max(int(point[0] * self.resolution), 0), self.nx - 1)
        iy = min(max(int(point[1] * self.resolution), 0), self.ny - 1)
        return ((ix + 0.5) / self.resolution, (iy + 0.5) / self.resolution)


@dataclass(frozen=True)
class Topology:
    sensors: tuple[Sensor, ...]
    devices: tuple[ControlDevice, ...]
    servers: tuple[EdgeServer, ...]
    grid: AreaGrid
    rng_seed: int = 0
    coverage_target: float = 0.95
    hub: int = 0

    def __post_init__(self):
        n_dev, n_srv = len(self.devices), len(self.servers)
        for s in self.sensors:
            if not 0 <= s.owner_device < n_dev:
                raise ValueError(f"sensor {s.id} has unknown owner {s.owner_device}")
        for d in self.devices:
            if any(not 0 <= link.server < n_srv for link in d.server_links):
                raise ValueError(f"device {d.id} links to an unknown server")
        if not 0 <= self.hub < n_srv:
            raise ValueError("hub must index a server")

    # -- cached array views ------------------------------------------------
    @cached_property
    def r_max(self) -> np.ndarray:
        return np.array([s.r_max for s in self.sensors], dtype=float)

    @cached_property
    def adjustable(self) -> np.ndarray:
        return np.array([s.adjustable for s in self.sensors], dtype=bool)

    @cached_property
    def owner(self) -> np.ndarray:
        return np.array([s.owner_device for s in self.sensors], dtype=np.int64)

    @cached_property
    def d2(self) -> np.ndarray:
        """(n_sensors, n_cells) squared sensor-to-cell-center distances."""
        if not self.sensors:
            return np.zeros((0, self.grid.n_cells))
        return np.stack([self.grid.squared_distances(s.position) for s in self.sensors])

    @cached_property
    def full_masks(self) -> np.ndarray:
        return self.masks(self.r_max)

    @cached_property
    def neighbors(self) -> np.ndarray:
        """Boolean (K, K): sensors whose r_max disks share a cell (self excluded)."""
        m = self.full_masks.astype(np.int32)
        shared = (m @ m.T) > 0
        np.fill_diagonal(shared, False)
        return shared

    @cached_property
    def agent_of_device(self) -> np.ndarray:
        return np.array([d.primary_server for d in self.devices], dtype=np.int64)

    def sensor_alive(self, alive) -> np.ndarray:
        return np.asarray(alive, dtype=bool)[self.owner] if len(self.sensors) else np.zeros(0, bool)

    def masks(self, radii, alive=None) -> np.ndarray:
        """(K, n_cells) coverage masks for per-sensor radii, gated by device liveness."""
        radii = np.asarray(radii, dtype=float)
        m = (self.d2 <= (radii * radii)[:, None]) & (radii > 0)[:, None]
        if alive is not None:
            m &= self.sensor_alive(alive)[:, None]
        return m

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "format": "edgesense-topology/1",
            "rng_seed": int(self.rng_seed),
            "coverage_target": self.coverage_target,
            "hub": self.hub,
            "grid": asdict(self.grid),
            "sensors": [asdict(s) for s in self.sensors],
            "devices": [asdict(d) for d in self.devices],
            "servers": [asdict(e) for e in self.servers],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        raw = json.loads(text)
        sensors = tuple(
            Sensor(**{**s, "position": tuple(s["position"]), "current_law": tuple(s["current_law"])})
            for s in raw["sensors"]
        )
        devices = tuple(
            ControlDevice(**{**d, "position": tuple(d["position"]),
                             "battery": BatteryState(**d["battery"]),
                             "server_links": tuple(Link(*l) for l in d["server_links"])})
            for d in raw["devices"]
        )
        servers = tuple(
            EdgeServer(**{**e, "peer_links": tuple(Link(*l) for l in e["peer_links"])})
            for e in raw["servers"]
        )
        return cls(sensors=sensors, devices=devices, servers=servers,
                   grid=AreaGrid(**raw["grid"]), rng_seed=raw["rng_seed"],
                   coverage_target=raw["coverage_target"], hub=raw["hub"])


# -- geometry ops ---------------------------------------------------------------

def _check_radius(sensor: Sensor, radius: float) -> None:
    if not 0.0 <= radius <= sensor.r_max:
        raise RadiusOutOfRange(f"radius {radius} outside [0, {sensor.r_max}] for sensor {sensor.id}")


def covered_cells(sensor: Sensor, radius: float, grid: AreaGrid) -> np.ndarray:
    """Sorted indices of cells whose centers are within ``radius`` of the sensor."""
    _check_radius(sensor, radius)
    if radius == 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(grid.squared_distances(sensor.position) <= radius * radius)


def sensed_data_size(sensor: Sensor, radius: float, grid: AreaGrid) -> float:
    return sensor.bytes_per_cell * len(covered_cells(sensor, radius, grid))


def coverage_counts(topology: Topology, radii, alive) -> np.ndarray:
    """Per-cell number of alive sensors covering it."""
    return topology.masks(radii, alive).sum(axis=0)


def coverage_fraction(topology: Topology, radii, alive) -> float:
    if len(radii) != len(topology.sensors):
        raise ValueError("need one radius per sensor")
    counts = coverage_counts(topology, radii, alive)
    return int(np.count_nonzero(counts)) / topology.grid.n_cells


def duplication_rate(topology: Topology, radii, alive) -> float:
    if len(radii) != len(topology.sensors):
        raise ValueError("need one radius per sensor")
    counts = coverage_counts(topology, radii, alive)
    total = int(counts.sum())
    if total == 0:
        return 0.0
    return (total - int(np.count_nonzero(counts))) / total


# -- topology construction ---------------------------------------------------------

def _disk_kernel(radius: float, resolution: int) -> np.ndarray:
    reach = int(math.floor(radius * resolution))
    off = np.arange(-reach, reach + 1) / resolution
    dx, dy = np.meshgrid(off, off)
    return (dx * dx + dy * dy <= radius * radius).astype(float)


def greedy_device_positions(grid: AreaGrid, n_devices: int, radius: float) -> list[tuple[float, float]]:
    """Place devices one at a time at the cell center covering most uncovered cells.

    Once the area is fully covered, ties are broken toward cells that are
    covered by fewer devices so later devices spread into a second layer.
    """
    kernel = _disk_kernel(radius, grid.resolution)
    counts = np.zeros((grid.ny, grid.nx))
    positions = []
    for _ in range(n_devices):
        new = (counts == 0).astype(float)
        spread = np.exp2(-counts)
        score = fftconvolve(new, kernel, mode="same") + 1e-4 * fftconvolve(spread, kernel, mode="same")
        score = np.round(score, 6)
        idx = int(np.argmax(score))
        pos = tuple(float(v) for v in grid.centers[idx])
        positions.append(pos)
        counts += (grid.squared_distances(pos) <= radius * radius).reshape(grid.ny, grid.nx)
    return positions


def build_topology(config: SimConfig, seed: int) -> Topology:
    """Build a deterministic topology for ``(config, seed)``.

    Devices are placed greedily, sensors uniformly at random (snapped to cell
    centers) until their r_max disks reach the coverage target. Each sensor
    belongs to its nearest device; devices attach round-robin to servers.
    """
    t, b, e, ln = config.topology, config.battery, config.energy, config.links
    if min(t.n_servers, t.n_devices, t.n_sensors) <= 0:
        raise ValueError("entity counts must be positive")
    rng = np.random.default_rng(seed)
    grid = AreaGrid(t.width, t.height, t.resolution)

    dev_pos = greedy_device_positions(grid, t.n_devices, config.nominal_radius)
    dev_xy = np.array(dev_pos)

    sensor_draw = None
    for _ in range(t.max_attempts):
        xy = rng.uniform([0.0, 0.0], [t.width, t.height], size=(t.n_sensors, 2))
        xy = np.array([grid.snap(p) for p in xy])
        r_max = rng.uniform(t.radius_min, t.radius_max, size=t.n_sensors)
        adjustable = np.zeros(t.n_sensors, dtype=bool)
        adjustable[rng.permutation(t.n_sensors)[: t.n_adjustable]] = True
        covered = np.zeros(grid.n_cells, dtype=bool)
        for p, r in zip(xy, r_max):
            covered |= grid.squared_distances(p) <= r * r
        if covered.mean() >= t.coverage_target:
            sensor_draw = (xy, r_max, adjustable)
            break
    if sensor_draw is None:
        raise InfeasibleCoverage(
            f"no sensor placement reached coverage {t.coverage_target} in {t.max_attempts} attempts")
    xy, r_max, adjustable = sensor_draw

    d2 = ((xy[:, None, :] - dev_xy[None, :, :]) ** 2).sum(axis=2)
    owners = np.argmin(d2, axis=1)

    capacities = rng.uniform(b.capacity_min, b.capacity_max, size=t.n_devices)
    devices = []
    for n in range(t.n_devices):
        links = []
        for j in range(t.links_per_device):
            links.append(Link(
                server=(n + j) % t.n_servers,
                rate=float(rng.uniform(ln.device_rate_min, ln.device_rate_max)),
                power=float(rng.uniform(ln.device_power_min, ln.device_power_max)),
            ))
        battery = BatteryState.charged(float(capacities[n]), soc=b.soc_init,
                                       soc_min=b.soc_min, soc_max=b.soc_max)
        devices.append(ControlDevice(
            id=n, position=dev_pos[n], battery=battery,
            compute_freq_f=e.compute_freq, energy_factor_k=e.energy_factor,
            server_links=tuple(links),
        ))

    sensors = []
    for i in range(t.n_sensors):
        sensors.append(Sensor(
            id=i, position=(float(xy[i, 0]), float(xy[i, 1])), r_max=float(r_max[i]),
            adjustable=bool(adjustable[i]), voltage_U=e.voltage,
            current_law=(e.current_idle, e.current_area), bytes_per_cell=e.bytes_per_cell,
            owner_device=int(owners[i]), link_rate_B1=ln.sensor_rate, link_power_P1=ln.sensor_power,
            fixed_L1=0.0 if adjustable[i] else float(config.dedup.l1_fraction * r_max[i]),
        ))

    servers = []
    for j in range(t.n_servers):
        peers = tuple(Link(k, ln.peer_rate, ln.peer_power) for k in range(t.n_servers) if k != j)
        servers.append(EdgeServer(id=j, compute_capacity_EC=config.servers.compute_capacity,
                                  storage_capacity_ES=config.servers.storage_capacity,
                                  peer_links=peers))

    return Topology(sensors=tuple(sensors), devices=tuple(devices), servers=tuple(servers),
                    grid=grid, rng_seed=int(seed), coverage_target=t.coverage_target, hub=ln.hub)


def with_batteries(topology: Topology, batteries) -> Topology:
    """Copy of ``topology`` with replaced initial device batteries."""
    devices = tuple(replace(d, battery=bt) for d, bt in zip(topology.devices, batteries))
    return replace(topology, devices=devices)
