"""Rectangular blockage fields and segment line-of-sight queries."""

from __future__ import annotations

import csv
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

Point = tuple[float, float]


@dataclass(frozen=True)
class Rect:
    center: Point
    half_extents: Point
    orientation: float = 0.0

    def __post_init__(self) -> None:
        hx, hy = self.half_extents
        if hx <= 0 or hy <= 0:
            raise ValueError(f"half extents must be positive, got {self.half_extents}")

    def corners(self) -> list[Point]:
        cx, cy = self.center
        hx, hy = self.half_extents
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        out = []
        for ux, uy in ((-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)):
            out.append((cx + c * ux - s * uy, cy + s * ux + c * uy))
        return out


@dataclass(frozen=True)
class BlockageField:
    """Immutable set of obstacles with packed arrays for vectorized queries."""

    rects: tuple[Rect, ...]
    area_bounds: Point
    density: float
    _cx: np.ndarray = field(init=False, repr=False, compare=False)
    _cy: np.ndarray = field(init=False, repr=False, compare=False)
    _hx: np.ndarray = field(init=False, repr=False, compare=False)
    _hy: np.ndarray = field(init=False, repr=False, compare=False)
    _cos: np.ndarray = field(init=False, repr=False, compare=False)
    _sin: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        rects = tuple(self.rects)
        object.__setattr__(self, "rects", rects)
        arr = lambda f: np.array([f(r) for r in rects], dtype=float)  # noqa: E731
        object.__setattr__(self, "_cx", arr(lambda r: r.center[0]))
        object.__setattr__(self, "_cy", arr(lambda r: r.center[1]))
        object.__setattr__(self, "_hx", arr(lambda r: r.half_extents[0]))
        object.__setattr__(self, "_hy", arr(lambda r: r.half_extents[1]))
        object.__setattr__(self, "_cos", arr(lambda r: math.cos(r.orientation)))
        object.__setattr__(self, "_sin", arr(lambda r: math.sin(r.orientation)))

    def __len__(self) -> int:
        return len(self.rects)

    def with_rect(self, rect: Rect) -> BlockageField:
        return BlockageField(self.rects + (rect,), self.area_bounds, self.density)

    def without(self, index: int) -> BlockageField:
        rects = self.rects[:index] + self.rects[index + 1 :]
        return BlockageField(rects, self.area_bounds, self.density)

    def blocked(self, tx: np.ndarray, rx: np.ndarray) -> np.ndarray:
        """Boolean per segment: does segment tx[i]->rx[i] touch any rect?

        ``tx`` and ``rx`` are (n, 2) arrays (``tx`` may be a single point).
        Uses slab clipping in each rectangle's local frame.
        """
        tx = np.atleast_2d(np.asarray(tx, dtype=float))
        rx = np.atleast_2d(np.asarray(rx, dtype=float))
        n = max(len(tx), len(rx))
        if not self.rects:
            return np.zeros(n, dtype=bool)
        # (n, m) broadcasting: segments along axis 0, rects along axis 1
        ox = tx[:, 0:1] - self._cx
        oy = tx[:, 1:2] - self._cy
        dx = (rx[:, 0:1] - tx[:, 0:1]) + np.zeros_like(ox)
        dy = (rx[:, 1:2] - tx[:, 1:2]) + np.zeros_like(oy)
        c, s = self._cos, self._sin
        px = c * ox + s * oy
        py = -s * ox + c * oy
        vx = c * dx + s * dy
        vy = -s * dx + c * dy
        t0 = np.zeros_like(px)
        t1 = np.ones_like(px)
        ok = np.ones(px.shape, dtype=bool)
        with np.errstate(divide="ignore", invalid="ignore"):
            for p, v, h in ((px, vx, self._hx), (py, vy, self._hy)):
                parallel = v == 0.0
                ok &= ~(parallel & (np.abs(p) > h))
                ta = (-h - p) / v
                tb = (h - p) / v
                lo = np.where(parallel, -np.inf, np.minimum(ta, tb))
                hi = np.where(parallel, np.inf, np.maximum(ta, tb))
                t0 = np.maximum(t0, lo)
                t1 = np.minimum(t1, hi)
        hit = ok & (t0 <= t1)
        return hit.any(axis=1)


class SegmentFan:
    """Segments from fixed origins to one moving endpoint, against a fixed field.

    Everything that depends only on the origins is computed once, so each
    query is a handful of small array operations. Results match
    ``BlockageField.blocked`` exactly.
    """

    def __init__(self, field: BlockageField, origins: np.ndarray) -> None:
        o = np.asarray(origins, dtype=float).reshape(-1, 2)
        self.origins = o
        self._n = len(o)
        self._empty = not field.rects
        if self._empty:
            return
        c, s = field._cos, field._sin
        self._c, self._s = c, s
        self._aligned = bool(np.all(s == 0.0) and np.all(c == 1.0))
        ox = o[:, 0:1] - field._cx
        oy = o[:, 1:2] - field._cy
        px = c * ox + s * oy
        py = -s * ox + c * oy
        self._slabs = []
        for p, h in ((px, field._hx), (py, field._hy)):
            a, b = -h - p, h - p
            inside = (a <= 0.0) & (b >= 0.0)
            self._slabs.append((a, b, np.where(inside, -np.inf, np.inf),
                                np.where(inside, np.inf, -np.inf)))

    def blocked(self, end: Point | np.ndarray) -> np.ndarray:
        if self._empty:
            return np.zeros(self._n, dtype=bool)
        dx = (end[0] - self.origins[:, 0])[:, None]
        dy = (end[1] - self.origins[:, 1])[:, None]
        if self._aligned:
            vs = (dx, dy)
        else:
            c, s = self._c, self._s
            vs = (c * dx + s * dy, -s * dx + c * dy)
        t0 = t1 = None
        for (a, b, lo_par, hi_par), v in zip(self._slabs, vs):
            par = v == 0.0
            safe = np.where(par, 1.0, v)
            ta = a / safe
            tb = b / safe
            lo = np.where(par, lo_par, np.minimum(ta, tb))
            hi = np.where(par, hi_par, np.maximum(ta, tb))
            t0 = lo if t0 is None else np.maximum(t0, lo)
            t1 = hi if t1 is None else np.minimum(t1, hi)
        return ((np.maximum(t0, 0.0) <= np.minimum(t1, 1.0))).any(axis=1)


def generate_field(
    density: float,
    bounds: Point,
    rng: np.random.Generator,
    size_range: tuple[float, float] = (1.0, 2.0),
    random_orientation: bool = False,
    fixed_count: bool = False,
) -> BlockageField:
    """Scatter rectangles as a spatial Poisson process of ``density`` per km^2.

    Full side lengths are uniform on ``size_range`` (meters). With
    ``fixed_count`` the count is the rounded mean instead of a Poisson draw.
    """
    if density < 0:
        raise ValueError("density must be non-negative")
    width, height = bounds
    if width <= 0 or height <= 0:
        raise ValueError("bounds must be positive")
    mean = density * (width * height) / 1e6
    count = int(round(mean)) if fixed_count else int(rng.poisson(mean))
    if count == 0:
        return BlockageField((), (width, height), density)
    cx = rng.uniform(0.0, width, count)
    cy = rng.uniform(0.0, height, count)
    lo, hi = size_range
    sx = rng.uniform(lo, hi, count)
    sy = rng.uniform(lo, hi, count)
    theta = rng.uniform(0.0, math.pi, count) if random_orientation else np.zeros(count)
    rects = tuple(
        Rect((float(cx[i]), float(cy[i])), (float(sx[i]) / 2, float(sy[i]) / 2), float(theta[i]))
        for i in range(count)
    )
    return BlockageField(rects, (width, height), density)


def is_los(tx: Point, rx: Point, field: BlockageField) -> bool:
    """True iff the segment between ``tx`` and ``rx`` touches no obstacle."""
    if tx[0] == rx[0] and tx[1] == rx[1]:
        raise ValueError("tx and rx coincide")
    return not bool(field.blocked(np.array([tx]), np.array([rx]))[0])


def los_many(tx: np.ndarray, rx: Point | np.ndarray, field: BlockageField) -> np.ndarray:
    return ~field.blocked(np.asarray(tx, dtype=float), np.asarray(rx, dtype=float))


def write_field_csv(field: BlockageField, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cx", "cy", "hx", "hy", "orientation"])
        for r in field.rects:
            writer.writerow([repr(r.center[0]), repr(r.center[1]),
                             repr(r.half_extents[0]), repr(r.half_extents[1]),
                             repr(r.orientation)])


def read_field_csv(path: str | Path, bounds: Point, density: float) -> BlockageField:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    rects = [
        Rect((float(r["cx"]), float(r["cy"])), (float(r["hx"]), float(r["hy"])),
             float(r["orientation"]))
        for r in rows
    ]
    return BlockageField(tuple(rects), bounds, density)


def field_from_rects(rects: Sequence[Rect], bounds: Point = (100.0, 100.0)) -> BlockageField:
    return BlockageField(tuple(rects), bounds, 0.0)
