"""Redundancy elimination on control devices and edge servers.

Fixed-range sensors have their cells split into three priority rings
(red inside ``l1``, blue up to ``l2``, green up to ``r_max``). Batches go
out in priority order and drop cells the edge tier already holds.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import BadL1, NotFixedSensor
from .netmodel import AreaGrid, Sensor


class Stage(enum.IntEnum):
    RED = 0
    BLUE = 1
    GREEN = 2


@dataclass(frozen=True)
class PriorityPartition:
    red_cells: np.ndarray
    blue_cells: np.ndarray
    green_cells: np.ndarray
    l1: float
    l2: float
    bytes_per_cell: float = 1.0

    def zones(self) -> tuple[tuple[Stage, np.ndarray], ...]:
        return ((Stage.RED, self.red_cells), (Stage.BLUE, self.blue_cells),
                (Stage.GREEN, self.green_cells))

    @property
    def all_cells(self) -> np.ndarray:
        return np.sort(np.concatenate([self.red_cells, self.blue_cells, self.green_cells]))


@dataclass(frozen=True)
class StagedBatch:
    stage: Stage
    data_bytes: float
    cells: np.ndarray


def partition(sensor: Sensor, grid: AreaGrid, l1: float | None = None,
              l2: float | None = None) -> PriorityPartition:
    """Split a fixed sensor's r_max disk into red/blue/green rings.

    ``l1`` defaults to the sensor's ``fixed_L1``; ``l2`` to ``(r_max + l1) / 2``.
    """
    if sensor.adjustable:
        raise NotFixedSensor(f"sensor {sensor.id} is adjustable")
    l1 = sensor.fixed_L1 if l1 is None else l1
    if not 0.0 < l1 < sensor.r_max:
        raise BadL1(f"l1={l1} must lie in (0, {sensor.r_max})")
    if l2 is None or l2 == 0:
        l2 = (sensor.r_max + l1) / 2
    if not l1 <= l2 <= sensor.r_max:
        raise BadL1(f"l2={l2} must lie in [{l1}, {sensor.r_max}]")
    d2 = grid.squared_distances(sensor.position)
    r2 = sensor.r_max * sensor.r_max
    red = np.flatnonzero(d2 <= l1 * l1)
    blue = np.flatnonzero((d2 > l1 * l1) & (d2 <= l2 * l2))
    green = np.flatnonzero((d2 > l2 * l2) & (d2 <= r2))
    return PriorityPartition(red, blue, green, float(l1), float(l2), sensor.bytes_per_cell)


def staged_transmit(part: PriorityPartition, region_complete: np.ndarray) -> list[StagedBatch]:
    """Emit red, then blue and green only while the edge tier still misses cells.

    ``region_complete`` is a per-cell boolean snapshot of what the edge tier
    already holds this slot. It is not modified.
    """
    held = np.asarray(region_complete, dtype=bool)
    batches = []
    for stage, cells in part.zones():
        missing = cells[~held[cells]]
        if stage is Stage.RED or len(missing):
            batches.append(StagedBatch(stage, part.bytes_per_cell * len(missing), missing))
    return batches


# -- content hashing ------------------------------------------------------------------

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def cell_hash(cells, slot: int = 0) -> np.ndarray:
    """64-bit splitmix hash of ``(cell index, slot)`` pairs."""
    x = (np.uint64(slot) << np.uint64(32)) ^ np.asarray(cells, dtype=np.uint64)
    z = x + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def first_arrivals(batches: Sequence[Iterable[int]], slot: int = 0) -> list[np.ndarray]:
    """Per batch, a boolean mask of cells that are the first copy seen."""
    arrays = [np.asarray(list(c) if not isinstance(c, np.ndarray) else c, dtype=np.int64)
              for c in batches]
    if not arrays:
        return []
    sizes = [len(a) for a in arrays]
    hashes = cell_hash(np.concatenate(arrays), slot) if sum(sizes) else np.zeros(0, np.uint64)
    _, first = np.unique(hashes, return_index=True)
    keep = np.zeros(len(hashes), dtype=bool)
    keep[first] = True
    return np.split(keep, np.cumsum(sizes)[:-1])


def hash_dedup(batches: Sequence[tuple[Iterable[int], float]], slot: int = 0) -> tuple[float, float]:
    """Drop repeated cells across batches, keeping the first arrival.

    Each batch is ``(cells, bytes)``; bytes are spread evenly over its cells.
    Returns ``(unique_bytes, dropped_bytes)``.
    """
    masks = first_arrivals([cells for cells, _ in batches], slot)
    unique = dropped = 0.0
    for keep, (_, nbytes) in zip(masks, batches):
        if len(keep) == 0:
            unique += nbytes
            continue
        kept = nbytes * keep.sum() / len(keep)
        unique += kept
        dropped += nbytes - kept
    return unique, dropped
