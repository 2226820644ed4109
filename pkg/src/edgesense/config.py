"""Simulation configuration and the flat ``key = value`` config format.

Keys use dotted section prefixes (``marl.gamma = 0.99``). A bare field name
is accepted when it is unique across sections (``radius_max = 22``). Lines
starting with ``#`` are comments. Unknown keys are rejected.

Units: lengths in area units, energy in joules, power in watts, rates in
bytes/s, data in bytes, time in seconds. The compute energy factor
``energy.energy_factor`` is in J·s²/(byte·cycle²) so that
``k * bytes * freq**2`` is joules.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ParseError, ValidationError

POLICY_KINDS = ("senses", "senses-re", "comp", "load")


@dataclass
class TopologyConfig:
    n_servers: int = 5
    n_devices: int = 28
    n_sensors: int = 30
    n_adjustable: int = 24
    width: float = 100.0
    height: float = 100.0
    resolution: int = 1
    radius_min: float = 15.0
    radius_max: float = 25.0
    # 0 means the midpoint of the radius range
    nominal_radius: float = 0.0
    coverage_target: float = 0.95
    max_attempts: int = 200
    links_per_device: int = 1


@dataclass
class BatteryConfig:
    capacity_min: float = 2000.0
    capacity_max: float = 4000.0
    soc_init: float = 1.0
    soc_min: float = 0.1
    soc_max: float = 1.0


@dataclass
class EnergyConfig:
    voltage: float = 5.0
    current_idle: float = 0.01
    current_area: float = 0.001
    bytes_per_cell: float = 100.0
    compute_freq: float = 1.0e8
    energy_factor: float = 1.5e-21
    slot_s: float = 1.0


@dataclass
class LinkConfig:
    sensor_rate: float = 5.0e4
    sensor_power: float = 0.25
    device_rate_min: float = 5.0e4
    device_rate_max: float = 1.0e5
    device_power_min: float = 0.75
    device_power_max: float = 1.25
    peer_rate: float = 1.0e6
    peer_power: float = 5.0
    hub: int = 0


@dataclass
class ServerConfig:
    compute_capacity: float = 2.0e6
    storage_capacity: float = 1.0e9


@dataclass
class DedupConfig:
    l1_fraction: float = 0.6
    # 0 means l2 = (r_max + l1) / 2
    l2_override: float = 0.0


@dataclass
class BaselineConfig:
    offload_soc: float = 0.3
    raw_inflation: float = 1.2
    compression_ratio: float = 1.0
    inference_J: float = 0.05
    inference_load: float = 0.02


@dataclass
class Hyperparams:
    lr: float = 0.05
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    batch_size: int = 256
    epochs: int = 4
    step_max: int = 300
    radius_step: float = 1.0
    weak_threshold: float = 0.8
    rescue_soc: float = 0.2
    hidden: int = 64
    grad_clip: float = 0.5
    ent_coef: float = 0.0
    # 0 means train on episodes of the top-level horizon
    episode_len: int = 0


@dataclass
class RewardWeights:
    w_energy: float = 0.5
    w_load: float = 0.1
    w_alive: float = 1.0
    w_coverage: float = 20.0


@dataclass
class SimConfig:
    seed: int = 42
    policy: str = "senses"
    horizon: int = 300
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    energy: EnergyConfig = field(default_factory=EnergyConfig)
    links: LinkConfig = field(default_factory=LinkConfig)
    servers: ServerConfig = field(default_factory=ServerConfig)
    dedup: DedupConfig = field(default_factory=DedupConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    marl: Hyperparams = field(default_factory=Hyperparams)
    reward: RewardWeights = field(default_factory=RewardWeights)

    @property
    def nominal_radius(self) -> float:
        t = self.topology
        return t.nominal_radius or 0.5 * (t.radius_min + t.radius_max)

    @property
    def episode_len(self) -> int:
        return self.marl.episode_len or self.horizon


def _field_types(cls) -> dict[str, type]:
    return typing.get_type_hints(cls)


def _key_table() -> dict[str, tuple[str | None, str, type]]:
    """Map every accepted key (dotted and unique bare) to (section, name, type)."""
    table: dict[str, tuple[str | None, str, type]] = {}
    bare: dict[str, list[tuple[str | None, str, type]]] = {}
    for name, tp in _field_types(SimConfig).items():
        if dataclasses.is_dataclass(tp):
            for sub, stp in _field_types(tp).items():
                entry = (name, sub, stp)
                table[f"{name}.{sub}"] = entry
                bare.setdefault(sub, []).append(entry)
        else:
            table[name] = (None, name, tp)
    for sub, entries in bare.items():
        if len(entries) == 1 and sub not in table:
            table[sub] = entries[0]
    return table


def _convert(raw: str, tp: type, key: str, line: int | None):
    raw = raw.strip()
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        return raw
    except ValueError:
        raise ParseError(f"bad value {raw!r} for key {key!r} (expected {tp.__name__})",
                         line=line, key=key) from None


def apply_overrides(cfg: SimConfig, items, *, lines=None) -> SimConfig:
    """Set ``(key, raw_value)`` pairs on ``cfg`` in place and return it."""
    table = _key_table()
    for i, (key, raw) in enumerate(items):
        line = lines[i] if lines is not None else None
        key = key.strip()
        if key not in table:
            raise ParseError(f"unknown key {key!r}", line=line, key=key)
        section, name, tp = table[key]
        value = _convert(str(raw), tp, key, line)
        target = cfg if section is None else getattr(cfg, section)
        setattr(target, name, value)
    return cfg


def parse_text(text: str) -> list[tuple[str, str, int]]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", line=lineno)
        key, _, value = stripped.partition("=")
        if not key.strip():
            raise ParseError("empty key", line=lineno)
        out.append((key.strip(), value.strip(), lineno))
    return out


def parse_config(path: str | Path | None = None, overrides: dict | None = None) -> SimConfig:
    """Build a validated config from an optional file plus inline overrides.

    Overrides win over file keys.
    """
    cfg = SimConfig()
    if path is not None:
        entries = parse_text(Path(path).read_text())
        apply_overrides(cfg, [(k, v) for k, v, _ in entries], lines=[n for _, _, n in entries])
    if overrides:
        apply_overrides(cfg, list(overrides.items()))
    validate(cfg)
    return cfg


def validate(cfg: SimConfig) -> None:
    t, b, e, ln, m = cfg.topology, cfg.battery, cfg.energy, cfg.links, cfg.marl

    def need(ok: bool, key: str, msg: str) -> None:
        if not ok:
            raise ValidationError(key, msg)

    for key in ("n_servers", "n_devices", "n_sensors"):
        need(getattr(t, key) > 0, f"topology.{key}", "must be > 0")
    need(0 <= t.n_adjustable <= t.n_sensors, "topology.n_adjustable", "must be in [0, n_sensors]")
    need(t.n_devices >= t.n_servers, "topology.n_devices", "need at least one device per server")
    need(t.width > 0 and t.height > 0, "topology.width", "area must be positive")
    need(t.resolution >= 1, "topology.resolution", "must be >= 1")
    half = min(t.width, t.height) / 2
    need(0 < t.radius_min <= t.radius_max, "topology.radius_min", "need 0 < radius_min <= radius_max")
    need(t.radius_max <= half, "topology.radius_max", f"must be <= {half}")
    need(0 < t.coverage_target <= 1, "topology.coverage_target", "must be in (0, 1]")
    need(t.max_attempts >= 1, "topology.max_attempts", "must be >= 1")
    need(1 <= t.links_per_device <= t.n_servers, "topology.links_per_device", "must be in [1, n_servers]")
    need(0 < b.capacity_min <= b.capacity_max, "battery.capacity_min", "need 0 < min <= max")
    need(0 <= b.soc_min < b.soc_max <= 1, "battery.soc_min", "need 0 <= soc_min < soc_max <= 1")
    need(b.soc_min <= b.soc_init <= b.soc_max, "battery.soc_init", "must lie in [soc_min, soc_max]")
    for key in ("voltage", "bytes_per_cell", "compute_freq", "energy_factor", "slot_s"):
        need(getattr(e, key) > 0, f"energy.{key}", "must be > 0")
    need(e.current_idle >= 0 and e.current_area >= 0, "energy.current_area", "must be >= 0")
    need(ln.sensor_rate > 0 and ln.sensor_power >= 0, "links.sensor_rate", "bad sensor link")
    need(0 < ln.device_rate_min <= ln.device_rate_max, "links.device_rate_min", "need 0 < min <= max")
    need(0 <= ln.device_power_min <= ln.device_power_max, "links.device_power_min", "need 0 <= min <= max")
    need(ln.peer_rate > 0 and ln.peer_power >= 0, "links.peer_rate", "bad peer link")
    need(0 <= ln.hub < t.n_servers, "links.hub", "must index a server")
    need(cfg.servers.compute_capacity > 0, "servers.compute_capacity", "must be > 0")
    need(cfg.servers.storage_capacity > 0, "servers.storage_capacity", "must be > 0")
    need(0 < cfg.dedup.l1_fraction < 1, "dedup.l1_fraction", "must be in (0, 1)")
    need(cfg.dedup.l2_override >= 0, "dedup.l2_override", "must be >= 0")
    need(cfg.baselines.raw_inflation >= 1, "baselines.raw_inflation", "must be >= 1")
    need(0 < cfg.baselines.compression_ratio <= 1, "baselines.compression_ratio", "must be in (0, 1]")
    need(cfg.baselines.inference_J >= 0, "baselines.inference_J", "must be >= 0")
    need(m.lr > 0, "marl.lr", "must be > 0")
    for key in ("gamma", "lam", "clip"):
        need(0 <= getattr(m, key) <= 1, f"marl.{key}", "must be in [0, 1]")
    need(m.batch_size >= 1 and m.epochs >= 1, "marl.batch_size", "must be >= 1")
    need(m.step_max >= 0, "marl.step_max", "must be >= 0")
    need(m.radius_step > 0, "marl.radius_step", "must be > 0")
    need(0 < m.weak_threshold <= 1, "marl.weak_threshold", "must be in (0, 1]")
    need(m.hidden >= 1, "marl.hidden", "must be >= 1")
    need(m.episode_len >= 0, "marl.episode_len", "must be >= 0")
    for key in ("w_energy", "w_load", "w_alive", "w_coverage"):
        need(getattr(cfg.reward, key) >= 0, f"reward.{key}", "must be >= 0")
    need(cfg.policy in POLICY_KINDS, "policy", f"must be one of {POLICY_KINDS}")
    need(cfg.horizon >= 0, "horizon", "must be >= 0")


def dump_config(cfg: SimConfig) -> str:
    """Canonical text form; round-trips through :func:`parse_config`."""
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            for sf in dataclasses.fields(value):
                lines.append(f"{f.name}.{sf.name} = {getattr(value, sf.name)!r}".replace("'", ""))
        else:
            lines.append(f"{f.name} = {value!r}".replace("'", ""))
    return "\n".join(lines) + "\n"


def config_hash(cfg: SimConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]
