"""Base-station layout and UE motion along a street."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .config import ScenarioConfig


class Role(str, Enum):
    MN = "MN"
    SN = "SN"


class Mode(str, Enum):
    DUAL = "DUAL"
    HO_IN_PROGRESS = "HO_IN_PROGRESS"
    MN_FALLBACK = "MN_FALLBACK"


@dataclass(frozen=True)
class NodeDescriptor:
    id: int
    role: Role
    position: tuple[float, float]
    channel: int | None = None


def grid_positions(width: float, height: float, spacing: float) -> list[tuple[float, float]]:
    """Columns every ``spacing`` across the width, rows centred over the height.

    At least two rows are laid so every street point sees SNs on both sides.
    """
    if spacing <= 0:
        raise ValueError("inter-BS distance must be positive")
    ncols = int(math.floor(width / spacing + 1e-9)) + 1
    nrows = max(2, int(round(height / spacing)))
    xs = [i * spacing for i in range(ncols)]
    ys = [(j + 0.5) * height / nrows for j in range(nrows)]
    return [(x, y) for y in ys for x in xs]


def build_topology(config: ScenarioConfig) -> list[NodeDescriptor]:
    """SNs (ids 0..n-1) followed by the single MN (id n)."""
    if config.inter_bs_distance_m <= 0:
        raise ValueError("inter_bs_distance_m must be positive")
    width, height = config.area_width_m, config.area_height_m
    nodes: list[NodeDescriptor] = []
    if config.sn_positions:
        for i, (x, y) in enumerate(config.sn_positions):
            nodes.append(NodeDescriptor(i, Role.SN, (float(x), float(y)), i % 2))
    else:
        spacing = config.inter_bs_distance_m
        ncols = int(math.floor(width / spacing + 1e-9)) + 1
        for i, (x, y) in enumerate(grid_positions(width, height, spacing)):
            row, col = divmod(i, ncols)
            # checkerboard: neighbours along both axes use different carriers
            nodes.append(NodeDescriptor(i, Role.SN, (x, y), (row + col) % 2))
    mn_pos = config.mn_position or (width / 2, height / 2)
    nodes.append(NodeDescriptor(len(nodes), Role.MN, (float(mn_pos[0]), float(mn_pos[1]))))
    return nodes


def write_topology_csv(nodes: list[NodeDescriptor], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "role", "x", "y", "channel"])
        for n in nodes:
            writer.writerow([n.id, n.role.value, repr(n.position[0]), repr(n.position[1]),
                             "" if n.channel is None else n.channel])


@dataclass(frozen=True)
class Street:
    """Polyline the UE shuttles along, reversing at either end."""

    waypoints: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.waypoints) < 2:
            raise ValueError("a street needs at least two waypoints")
        object.__setattr__(self, "_cum", self._cumulative())

    def _cumulative(self) -> list[float]:
        cum = [0.0]
        for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            cum.append(cum[-1] + math.hypot(x1 - x0, y1 - y0))
        return cum

    @property
    def length(self) -> float:
        return self._cum[-1]  # type: ignore[attr-defined]

    def locate(self, s: float, direction: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """Point at arc length ``s`` and the unit heading for ``direction``."""
        cum = self._cum  # type: ignore[attr-defined]
        k = 0
        while k < len(cum) - 2 and s > cum[k + 1]:
            k += 1
        (x0, y0), (x1, y1) = self.waypoints[k], self.waypoints[k + 1]
        seg = cum[k + 1] - cum[k]
        u = (s - cum[k]) / seg if seg > 0 else 0.0
        ux, uy = ((x1 - x0) / seg, (y1 - y0) / seg) if seg > 0 else (0.0, 0.0)
        return (x0 + u * (x1 - x0), y0 + u * (y1 - y0)), (direction * ux, direction * uy)


@dataclass(frozen=True)
class UeState:
    position: tuple[float, float]
    velocity: tuple[float, float]
    street_s: float
    direction: int
    serving_sn: int | None = None
    idle_sn: int | None = None
    mn_id: int | None = None
    mode: Mode = Mode.DUAL
    reversals: int = 0

    @property
    def speed(self) -> float:
        return math.hypot(*self.velocity)


def place_ue(street: Street, speed: float, start_fraction: float = 0.5,
             direction: int = 1, mn_id: int | None = None) -> UeState:
    s = start_fraction * street.length
    pos, heading = street.locate(s, direction)
    return UeState(pos, (heading[0] * speed, heading[1] * speed), s, direction, mn_id=mn_id)


def step_mobility(ue: UeState, dt: float, street: Street) -> UeState:
    """Advance the UE along the street, folding overshoot back at either end."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    length = street.length
    speed = ue.speed
    s = ue.street_s + ue.direction * speed * dt
    direction = ue.direction
    reversals = ue.reversals
    while s >= length or s <= 0.0:
        if s >= length and direction > 0:
            s = 2 * length - s
        elif s <= 0.0 and direction < 0:
            s = -s
        else:
            break
        direction = -direction
        reversals += 1
    pos, heading = street.locate(s, direction)
    return UeState(pos, (heading[0] * speed, heading[1] * speed), s, direction, ue.serving_sn,
                   ue.idle_sn, ue.mn_id, ue.mode, reversals)


def initial_pair(
    ue_pos: tuple[float, float], positions: np.ndarray, channels: np.ndarray, sinr: np.ndarray
) -> tuple[int, int]:
    """Nearest SN plus the nearest SN on a different carrier; serving is the stronger."""
    d = np.hypot(positions[:, 0] - ue_pos[0], positions[:, 1] - ue_pos[1])
    order = np.lexsort((np.arange(len(d)), d))
    first = int(order[0])
    second = next((int(i) for i in order[1:] if channels[i] != channels[first]), None)
    if second is None:
        second = int(order[1])
    if sinr[second] > sinr[first]:
        return second, first
    return first, second
