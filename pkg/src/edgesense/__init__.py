"""Energy-aware sensing simulator for battery-powered control devices at the edge.

Modules: ``netmodel`` (topology and coverage), ``energy`` (per-slot energy
ledger), ``dedup`` (staged transmission and hash dedup), ``sim`` (slot
stepping), ``marl`` (radius-control agents), ``baselines`` and ``cli``.
"""

from .config import SimConfig, parse_config
from .netmodel import Topology, build_topology
from .sim import EdgeSim, EpisodeLog, run_episode, summarize

__all__ = ["EdgeSim", "EpisodeLog", "SimConfig", "Topology", "build_topology", "parse_config",
           "run_episode", "summarize"]
