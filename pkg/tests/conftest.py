from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from edgesense.config import SimConfig, parse_config
from edgesense.netmodel import (AreaGrid, BatteryState, ControlDevice, EdgeServer, Link, Sensor,
                                Topology, build_topology)

ROOT = Path(__file__).resolve().parent.parent
TOY_CFG = ROOT / "configs" / "toy.cfg"


def make_sensor(i=0, pos=(50.5, 50.5), r_max=20.0, adjustable=True, owner=0, a=0.01, b=0.0004,
                U=5.0, bpc=100.0, B1=5e4, P1=0.25, l1=None) -> Sensor:
    return Sensor(id=i, position=pos, r_max=r_max, adjustable=adjustable, voltage_U=U,
                  current_law=(a, b), bytes_per_cell=bpc, owner_device=owner, link_rate_B1=B1,
                  link_power_P1=P1, fixed_L1=0.0 if adjustable else (l1 or 0.6 * r_max))


def make_device(i=0, pos=(50.5, 50.5), capacity=3000.0, links=((0, 1e5, 1.0),), k=1e-21, f=1e8,
                soc=1.0, soc_min=0.0) -> ControlDevice:
    return ControlDevice(id=i, position=pos,
                         battery=BatteryState.charged(capacity, soc=soc, soc_min=soc_min),
                         compute_freq_f=f, energy_factor_k=k,
                         server_links=tuple(Link(*l) for l in links))


def mesh_servers(n: int, rate=1e6, power=5.0) -> tuple[EdgeServer, ...]:
    return tuple(EdgeServer(id=j, compute_capacity_EC=2e6, storage_capacity_ES=1e9,
                            peer_links=tuple(Link(k, rate, power) for k in range(n) if k != j))
                 for j in range(n))


def chain_topology(capacity=3000.0, soc_min=0.0) -> Topology:
    """Sensor -> device -> server 1 -> hub 0 with every leg tuned to the worked
    example: sensing 0.85 J, tran1 0.5 J, comp 1 J, tran2 1 J, tran3 1 J."""
    grid = AreaGrid(100.0, 100.0)
    probe = make_sensor()
    X = probe.bytes_per_cell * int(np.count_nonzero(grid.squared_distances(probe.position) <= 400.0))
    sensor = make_sensor(B1=X, P1=0.5)
    f = 1e3
    device = make_device(capacity=capacity, links=((1, 2 * X, 2.0),), k=1.0 / (X * f * f), f=f,
                         soc_min=soc_min)
    servers = mesh_servers(2, rate=X, power=1.0)
    return Topology(sensors=(sensor,), devices=(device,), servers=servers, grid=grid,
                    coverage_target=0.05, hub=0)


def chain_config(**kw) -> SimConfig:
    cfg = SimConfig()
    cfg.topology.coverage_target = 0.05
    for key, value in kw.items():
        section, name = key.split("__")
        setattr(getattr(cfg, section), name, value)
    return cfg


@pytest.fixture(scope="session")
def default_config() -> SimConfig:
    return parse_config(None)


@pytest.fixture(scope="session")
def default_topology(default_config) -> Topology:
    return build_topology(default_config, default_config.seed)


@pytest.fixture(scope="session")
def toy_config() -> SimConfig:
    return parse_config(TOY_CFG)


# -- acceptance reporting ----------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
