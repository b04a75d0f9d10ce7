"""Occupancy grids, benchmark environment generators and the sensor-reveal model.

Ground truth is stored as two boolean rasters: ``traversable`` (robots can
enter the cell) and ``rf_transparent`` (radio and line of sight pass through
it).  A window/skylight cell is rf_transparent but not traversable.  Arrays are
indexed ``[row, col]`` with row 0 at y = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

UNKNOWN = 0
FREE = 1
OBSTACLE = 2

Cell = tuple[int, int]


class GeometryError(ValueError):
    """Raised when an environment spec cannot be rasterised."""


@dataclass(frozen=True)
class Pose:
    x: float
    y: float

    def cell(self, resolution: float) -> Cell:
        return int(math.floor(self.y / resolution)), int(math.floor(self.x / resolution))

    def distance_to(self, other: Pose) -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


def cell_center(cell: Cell, resolution: float) -> Pose:
    r, c = cell
    return Pose((c + 0.5) * resolution, (r + 0.5) * resolution)


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    traversable: np.ndarray
    rf_transparent: np.ndarray
    resolution: float

    def __post_init__(self):
        trav = np.asarray(self.traversable, dtype=bool)
        rf = np.asarray(self.rf_transparent, dtype=bool)
        if trav.ndim != 2 or trav.shape != rf.shape:
            raise GeometryError("traversable and rf_transparent must be 2D rasters of equal shape")
        if trav.shape[0] < 1 or trav.shape[1] < 1:
            raise GeometryError("grid must have at least one cell")
        if not self.resolution > 0:
            raise GeometryError("resolution must be positive")
        if np.any(trav & ~rf):
            raise GeometryError("traversable cells must be rf_transparent")
        border = np.zeros_like(trav)
        border[0, :] = border[-1, :] = border[:, 0] = border[:, -1] = True
        if np.any(rf & border):
            raise GeometryError("border cells must be obstacles")
        trav.setflags(write=False)
        rf.setflags(write=False)
        object.__setattr__(self, "traversable", trav)
        object.__setattr__(self, "rf_transparent", rf)

    @property
    def height(self) -> int:
        return self.traversable.shape[0]

    @property
    def width(self) -> int:
        return self.traversable.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.traversable.shape

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.height and 0 <= cell[1] < self.width

    def pose_in_bounds(self, pose: Pose) -> bool:
        return self.in_bounds(pose.cell(self.resolution))

    def truth_belief(self) -> np.ndarray:
        """The belief raster a noiseless observer of every cell would hold."""
        return np.where(self.traversable, FREE, OBSTACLE).astype(np.int8)


class EnvKind(str, Enum):
    TUNNEL = "tunnel"
    WINDOW = "window"
    YJUNCTION = "yjunction"


@dataclass(frozen=True)
class TxEvent:
    """A feature that requires a transmission once the Scout sees it."""

    pose: Pose
    level: int | None = None  # None: use the episode's configured tx level
    name: str = "event"


@dataclass(frozen=True)
class EnvironmentSpec:
    """Geometry of one benchmark map, in meters.

    ``corridor_width`` applies to every corridor.  The meaning of the other
    fields depends on ``kind``:

    * tunnel: U-shaped corridor filling a ``width`` x ``height`` box.
    * window: two parallel corridors separated by a wall with one
      rf-transparent opening of ``opening_width`` at ``opening_x``.
    * yjunction: stem of ``stem_length`` up the middle of the box, splitting
      into two branches ``branch_angle_deg`` apart.
    """

    kind: EnvKind
    width: float
    height: float
    corridor_width: float = 2.0
    margin: float = 1.0
    opening_x: float = 8.0
    opening_width: float = 1.0
    stem_length: float = 18.0
    branch_angle_deg: float = 120.0
    branch_length: float | None = None

    @classmethod
    def tunnel(cls, **kw) -> EnvironmentSpec:
        return cls(EnvKind.TUNNEL, **{"width": 60.0, "height": 30.0, "corridor_width": 2.0, **kw})

    @classmethod
    def window(cls, **kw) -> EnvironmentSpec:
        return cls(EnvKind.WINDOW, **{"width": 40.0, "height": 20.0, "corridor_width": 2.5, **kw})

    @classmethod
    def yjunction(cls, **kw) -> EnvironmentSpec:
        return cls(EnvKind.YJUNCTION, **{"width": 40.0, "height": 40.0, "corridor_width": 2.5, **kw})


DEFAULT_SPECS = {
    "tunnel": EnvironmentSpec.tunnel(),
    "window": EnvironmentSpec.window(),
    "yjunction": EnvironmentSpec.yjunction(),
}


@dataclass(frozen=True, eq=False)
class Environment:
    name: str
    grid: OccupancyGrid
    start: Pose
    events: tuple[TxEvent, ...]
    spec: EnvironmentSpec | None = None

    @property
    def start_cell(self) -> Cell:
        return self.start.cell(self.grid.resolution)


def _cell_centers(shape: tuple[int, int], resolution: float) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.indices(shape)
    return (cols + 0.5) * resolution, (rows + 0.5) * resolution


def _rect(xs, ys, x0, y0, x1, y1) -> np.ndarray:
    return (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)


def _capsule(xs, ys, p, q, radius) -> np.ndarray:
    px, py = p
    qx, qy = q
    dx, dy = qx - px, qy - py
    seg2 = dx * dx + dy * dy
    t = np.clip(((xs - px) * dx + (ys - py) * dy) / seg2, 0.0, 1.0)
    return np.hypot(xs - (px + t * dx), ys - (py + t * dy)) <= radius


def generate_environment(spec: EnvironmentSpec, resolution: float = 0.25) -> Environment:
    """Rasterise ``spec`` into ground truth, the team start pose and its TxEvents."""
    if not resolution > 0:
        raise GeometryError("resolution must be positive")
    for name in ("width", "height", "corridor_width", "margin"):
        if not getattr(spec, name) > 0:
            raise GeometryError(f"{name} must be positive")
    if spec.corridor_width < resolution:
        raise GeometryError("corridor narrower than one cell")

    shape = (int(round(spec.height / resolution)), int(round(spec.width / resolution)))
    xs, ys = _cell_centers(shape, resolution)
    W, H, cw, m = spec.width, spec.height, spec.corridor_width, spec.margin
    window = np.zeros(shape, dtype=bool)

    if spec.kind is EnvKind.TUNNEL:
        if 2 * cw + 2 * m >= H or cw + 2 * m >= W:
            raise GeometryError("tunnel box too small for its corridors")
        free = (
            _rect(xs, ys, m, m, W - m, m + cw)
            | _rect(xs, ys, m, H - m - cw, W - m, H - m)
            | _rect(xs, ys, W - m - cw, m, W - m, H - m)
        )
        start = Pose(m + cw / 2, m + cw / 2)
        event = Pose(m + cw / 2, H - m - cw / 2)
    elif spec.kind is EnvKind.WINDOW:
        if 2 * cw + 2 * m >= H or cw + 2 * m >= W:
            raise GeometryError("window box too small for its corridors")
        if spec.opening_width < resolution:
            raise GeometryError("opening narrower than one cell")
        ox0, ox1 = spec.opening_x, spec.opening_x + spec.opening_width
        if ox0 <= m or ox1 >= W - m - cw:
            raise GeometryError("opening must lie strictly inside the shared wall")
        free = (
            _rect(xs, ys, m, m, W - m, m + cw)
            | _rect(xs, ys, m, H - m - cw, W - m, H - m)
            | _rect(xs, ys, W - m - cw, m, W - m, H - m)
        )
        window = _rect(xs, ys, ox0, m + cw, ox1, H - m - cw) & ~free
        start = Pose(m + cw / 2, m + cw / 2)
        event = Pose((ox0 + ox1) / 2, H - m - cw / 2)
    elif spec.kind is EnvKind.YJUNCTION:
        r = cw / 2
        base = (W / 2, m + r)
        junction = (W / 2, m + r + spec.stem_length)
        if junction[1] + r >= H - m:
            raise GeometryError("stem longer than the box")
        half = math.radians(spec.branch_angle_deg / 2)
        length = spec.branch_length
        if length is None:
            # longest branch that stays inside the margin on both bounds
            lim_x = (W / 2 - m - r) / math.sin(half) if half > 0 else math.inf
            lim_y = (H - m - r - junction[1]) / math.cos(half) if math.cos(half) > 1e-12 else math.inf
            length = min(lim_x, lim_y)
        if length < cw:
            raise GeometryError("branches too short")
        left = (junction[0] - length * math.sin(half), junction[1] + length * math.cos(half))
        right = (junction[0] + length * math.sin(half), junction[1] + length * math.cos(half))
        free = (
            _capsule(xs, ys, base, junction, r)
            | _capsule(xs, ys, junction, left, r)
            | _capsule(xs, ys, junction, right, r)
        )
        start = Pose(*base)
        event = Pose(*left)
    else:  # pragma: no cover
        raise GeometryError(f"unknown environment kind {spec.kind!r}")

    free[0, :] = free[-1, :] = free[:, 0] = free[:, -1] = False
    window[0, :] = window[-1, :] = window[:, 0] = window[:, -1] = False
    grid = OccupancyGrid(free, free | window, resolution)

    start = cell_center(start.cell(resolution), resolution)
    event = cell_center(event.cell(resolution), resolution)
    for p in (start, event):
        if not grid.in_bounds(p.cell(resolution)) or not grid.traversable[p.cell(resolution)]:
            raise GeometryError("start and event poses must be traversable")
    return Environment(spec.kind.value, grid, start, (TxEvent(event, name=f"{spec.kind.value}-event"),), spec)


def make_environment(name: str, resolution: float = 0.25) -> Environment:
    return generate_environment(DEFAULT_SPECS[name], resolution)


# --- sensing ---------------------------------------------------------------


RAY_STEP_CELLS = 0.05


@lru_cache(maxsize=16)
def ray_fan(radius_cells: float) -> tuple[np.ndarray, np.ndarray]:
    """Cell offsets crossed by a fan of straight rays leaving the origin cell center.

    Returns ``(offsets, valid)``: ``offsets`` is ``(M, L, 2)`` row/col offsets
    in the order each ray enters them, ``valid`` masks the padding.  Only
    cells whose centers lie within ``radius_cells`` are kept.  The angular
    spacing is fine enough that a ray lands on every cell within range,
    including wall cells seen at grazing incidence.
    """
    n_rays = max(8, 8 * int(math.ceil(2.0 * math.pi * max(radius_cells, 1.0))))
    rays = []
    n_steps = int(math.floor(radius_cells / RAY_STEP_CELLS))
    for k in range(n_rays):
        theta = 2.0 * math.pi * (k + 0.5) / n_rays
        dr, dc = math.sin(theta), math.cos(theta)
        cells: list[Cell] = []
        for i in range(1, n_steps + 1):
            t = i * RAY_STEP_CELLS
            cell = (int(math.floor(0.5 + t * dr)), int(math.floor(0.5 + t * dc)))
            if cell == (0, 0) or (cells and cells[-1] == cell):
                continue
            if cell[0] ** 2 + cell[1] ** 2 > radius_cells**2:
                break
            cells.append(cell)
        rays.append(cells)
    width = max(1, max(len(r) for r in rays))
    offsets = np.zeros((n_rays, width, 2), dtype=np.int64)
    valid = np.zeros((n_rays, width), dtype=bool)
    for k, cells in enumerate(rays):
        if cells:
            offsets[k, : len(cells)] = cells
            valid[k, : len(cells)] = True
    offsets.setflags(write=False)
    valid.setflags(write=False)
    return offsets, valid


def visible_cells(truth: OccupancyGrid, pose: Pose, sensor_range: float) -> tuple[np.ndarray, np.ndarray]:
    """Row/col index arrays (possibly repeated) of every cell a ray from ``pose`` reaches.

    A ray passes rf-transparent cells (including windows) and stops at the
    first opaque cell, which is itself seen.
    """
    origin = pose.cell(truth.resolution)
    offsets, valid = ray_fan(sensor_range / truth.resolution)
    H, W = truth.shape
    rows = offsets[..., 0] + origin[0]
    cols = offsets[..., 1] + origin[1]
    inside = valid & (rows >= 0) & (rows < H) & (cols >= 0) & (cols < W)
    clear = truth.rf_transparent[np.clip(rows, 0, H - 1), np.clip(cols, 0, W - 1)] & inside
    before = np.ones_like(clear)
    before[:, 1:] = np.cumprod(clear[:, :-1], axis=1, dtype=bool)
    seen = inside & before
    return np.append(rows[seen], origin[0]), np.append(cols[seen], origin[1])


def reveal(belief: np.ndarray, truth: OccupancyGrid, pose: Pose, sensor_range: float) -> np.ndarray:
    """Mark every cell the sensor can see from ``pose`` with its true state (in place)."""
    if not truth.pose_in_bounds(pose):
        raise ValueError("pose out of bounds")
    rows, cols = visible_cells(truth, pose, sensor_range)
    belief[rows, cols] = np.where(truth.traversable[rows, cols], FREE, OBSTACLE)
    return belief


def new_belief(truth: OccupancyGrid) -> np.ndarray:
    return np.full(truth.shape, UNKNOWN, dtype=np.int8)


# --- export ----------------------------------------------------------------

PGM_OBSTACLE, PGM_UNKNOWN, PGM_RF_ONLY, PGM_FREE = 0, 64, 128, 255


def grid_to_pgm_values(grid: OccupancyGrid) -> np.ndarray:
    out = np.full(grid.shape, PGM_OBSTACLE, dtype=np.uint8)
    out[grid.rf_transparent] = PGM_RF_ONLY
    out[grid.traversable] = PGM_FREE
    return out


def belief_to_pgm_values(belief: np.ndarray) -> np.ndarray:
    out = np.full(belief.shape, PGM_UNKNOWN, dtype=np.uint8)
    out[belief == FREE] = PGM_FREE
    out[belief == OBSTACLE] = PGM_OBSTACLE
    return out


def write_pgm(path: str | Path, values: np.ndarray, maxval: int = 255) -> None:
    """Write a plain (P2) PGM.  Row 0 of the file is the top of the map (max y)."""
    values = np.asarray(values)
    h, w = values.shape
    lines = ["P2", f"{w} {h}", str(maxval)]
    for row in values[::-1]:
        lines.append(" ".join(str(int(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path: str | Path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines() if not line.startswith("#") for t in line.split()]
    if tokens[0] != "P2":
        raise ValueError("not a plain PGM file")
    w, h = int(tokens[1]), int(tokens[2])
    data = np.array([int(t) for t in tokens[4 : 4 + w * h]]).reshape(h, w)
    return data[::-1]
