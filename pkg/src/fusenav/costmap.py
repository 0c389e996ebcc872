"""Three-layer occupancy map: static walls, LiDAR costs, camera costs.

Cost layers hold 0-255 per cell. A cell is free only when the static layer
is 0 and both cost layers are below 128; anything else is occupied. Scan
updates mark hit cells hard (single-hit certainty) and decay traversed
cells gradually, which keeps moving obstacles from leaving permanent
trails without flickering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .geometry import Pose2D
from .projection import PseudoScan

MARK_STEP = 255  # a single hit saturates the cell
CLEAR_STEP = 64  # traversed cells decay gradually


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry: cell (0, 0) has its corner at origin, +x right, +y up."""

    resolution: float
    origin_x: float
    origin_y: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.resolution <= 0:
            raise ValueError("resolution must be > 0")
        if self.width < 1 or self.height < 1:
            raise ValueError("grid must be at least 1x1")

    def contains(self, ix: int, iy: int) -> bool:
        return 0 <= ix < self.width and 0 <= iy < self.height


def world_to_cell(spec: GridSpec, x: float, y: float) -> tuple[int, int]:
    """Cell indices for a world point. Out-of-bounds indices are returned as-is."""
    return (
        int(math.floor((x - spec.origin_x) / spec.resolution)),
        int(math.floor((y - spec.origin_y) / spec.resolution)),
    )


def cell_to_world(spec: GridSpec, ix: int, iy: int) -> tuple[float, float]:
    """Center point of a cell."""
    return (
        spec.origin_x + (ix + 0.5) * spec.resolution,
        spec.origin_y + (iy + 0.5) * spec.resolution,
    )


@dataclass
class StaticLayer:
    """Binary map of the working area: 0 free, 1 occupied. Never mutated at runtime."""

    spec: GridSpec
    cells: np.ndarray  # (height, width) uint8, indexed [iy, ix]

    def __post_init__(self) -> None:
        c = np.asarray(self.cells, dtype=np.uint8)
        if c.shape != (self.spec.height, self.spec.width):
            raise ValueError("static grid shape does not match spec")
        if not np.all((c == 0) | (c == 1)):
            raise ValueError("static cells must be 0 or 1")
        self.cells = c


@dataclass
class CostLayer:
    spec: GridSpec
    cells: np.ndarray  # (height, width) uint8, 0..255

    def __post_init__(self) -> None:
        c = np.asarray(self.cells)
        if c.shape != (self.spec.height, self.spec.width):
            raise ValueError("cost grid shape does not match spec")
        if c.dtype != np.uint8:
            if np.any(c < 0) or np.any(c > 255):
                raise ValueError("cost cells must lie in [0, 255]")
            c = c.astype(np.uint8)
        self.cells = c

    @staticmethod
    def empty(spec: GridSpec) -> "CostLayer":
        return CostLayer(spec, np.zeros((spec.height, spec.width), dtype=np.uint8))


@dataclass
class MultiLayerMap:
    static: StaticLayer
    lidar: CostLayer
    camera: CostLayer

    def __post_init__(self) -> None:
        if not (self.static.spec == self.lidar.spec == self.camera.spec):
            raise ValueError("all layers must share one grid spec")

    @property
    def spec(self) -> GridSpec:
        return self.static.spec

    @staticmethod
    def from_static(static: StaticLayer) -> "MultiLayerMap":
        return MultiLayerMap(static, CostLayer.empty(static.spec), CostLayer.empty(static.spec))


FREE = "free"
OCCUPIED = "occupied"


def fused_state(m: MultiLayerMap, ix: int, iy: int) -> str:
    """Fusion rule: free only if static == 0 and both cost layers are < 128."""
    if not m.spec.contains(ix, iy):
        raise IndexError(f"cell ({ix}, {iy}) outside {m.spec.width}x{m.spec.height} grid")
    if (
        m.static.cells[iy, ix] == 0
        and m.lidar.cells[iy, ix] < 128
        and m.camera.cells[iy, ix] < 128
    ):
        return FREE
    return OCCUPIED


def fused_occupancy(m: MultiLayerMap) -> np.ndarray:
    """Boolean occupied grid applying the fusion rule to every cell."""
    return (m.static.cells == 1) | (m.lidar.cells >= 128) | (m.camera.cells >= 128)


def _beam_cells(
    spec: GridSpec, x0: float, y0: float, ex: np.ndarray, ey: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid cells crossed by each beam from (x0, y0) to its endpoint.

    4-connected integer line walk, vectorized across beams. Returns index
    arrays of shape (max_steps + 1, n_beams) for x and y plus the per-beam
    step count; row 0 is the start cell and row n[j] the endpoint cell of
    beam j (later rows repeat the endpoint).
    """
    gx0 = (x0 - spec.origin_x) / spec.resolution
    gy0 = (y0 - spec.origin_y) / spec.resolution
    gex = (ex - spec.origin_x) / spec.resolution
    gey = (ey - spec.origin_y) / spec.resolution

    ix0 = int(math.floor(gx0))
    iy0 = int(math.floor(gy0))
    iex = np.floor(gex).astype(np.int64)
    iey = np.floor(gey).astype(np.int64)

    n = np.abs(iex - ix0) + np.abs(iey - iy0)
    total = int(n.max()) if n.size else 0
    b = len(ex)
    xs = np.empty((total + 1, b), dtype=np.int64)
    ys = np.empty((total + 1, b), dtype=np.int64)
    xs[0] = ix0
    ys[0] = iy0
    if total == 0:
        return xs, ys, n

    step_x = np.sign(gex - gx0).astype(np.int64)
    step_y = np.sign(gey - gy0).astype(np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_dx = np.where(gex != gx0, 1.0 / (gex - gx0), np.inf)
        inv_dy = np.where(gey != gy0, 1.0 / (gey - gy0), np.inf)
        t_max_x = np.where(
            step_x != 0, ((ix0 + (step_x > 0)) - gx0) * inv_dx, np.inf
        )
        t_max_y = np.where(
            step_y != 0, ((iy0 + (step_y > 0)) - gy0) * inv_dy, np.inf
        )
    t_delta_x = np.abs(inv_dx)
    t_delta_y = np.abs(inv_dy)

    ix = xs[0].copy()
    iy = ys[0].copy()
    for s in range(total):
        active = s < n
        move_x = active & (t_max_x <= t_max_y)
        move_y = active & ~move_x
        ix += np.where(move_x, step_x, 0)
        iy += np.where(move_y, step_y, 0)
        t_max_x = np.where(move_x, t_max_x + t_delta_x, t_max_x)
        t_max_y = np.where(move_y, t_max_y + t_delta_y, t_max_y)
        xs[s + 1] = ix
        ys[s + 1] = iy
    return xs, ys, n


def mark_from_scan(layer: CostLayer, sensor_pose: Pose2D, scan: PseudoScan) -> CostLayer:
    """Update a cost layer from one scan taken at sensor_pose.

    For each finite beam, cells along the ray up to (but excluding) the hit
    cell decay by CLEAR_STEP and the hit cell rises by MARK_STEP; beams at
    exactly max_range clear their full length and mark nothing. All
    decrements are applied before all increments within one call, each
    saturating into [0, 255]. Out-of-bounds cells are skipped silently.
    Mutates and returns the layer.
    """
    finite = np.isfinite(scan.ranges)
    if not finite.any():
        return layer
    spec = layer.spec
    angles = sensor_pose.theta + scan.grid.angles()[finite]
    ranges = scan.ranges[finite]
    ex = sensor_pose.x + ranges * np.cos(angles)
    ey = sensor_pose.y + ranges * np.sin(angles)
    xs, ys, n = _beam_cells(spec, sensor_pose.x, sensor_pose.y, ex, ey)

    marks = ranges < scan.max_range
    rows = np.arange(xs.shape[0])[:, None]
    # Clears: rows strictly before the endpoint for marking beams, through
    # the endpoint for full-length clearing beams.
    clear_sel = rows < np.where(marks, n, n + 1)[None, :]
    cx = xs[clear_sel]
    cy = ys[clear_sel]
    hx = xs[n[marks], np.flatnonzero(marks)]
    hy = ys[n[marks], np.flatnonzero(marks)]

    work = layer.cells.astype(np.int32)
    ok = (cx >= 0) & (cx < spec.width) & (cy >= 0) & (cy < spec.height)
    np.subtract.at(work, (cy[ok], cx[ok]), CLEAR_STEP)
    np.clip(work, 0, None, out=work)
    ok = (hx >= 0) & (hx < spec.width) & (hy >= 0) & (hy < spec.height)
    np.add.at(work, (hy[ok], hx[ok]), MARK_STEP)
    np.clip(work, 0, 255, out=work)
    layer.cells[:] = work.astype(np.uint8)
    return layer


@dataclass
class InflatedGrid:
    """Occupancy after growing fused-occupied cells by the expansion radius.

    Queries outside the grid report occupied, which keeps planner rollouts
    inside the mapped area.
    """

    spec: GridSpec
    occupied: np.ndarray  # (height, width) bool

    def occupied_cell(self, ix: int, iy: int) -> bool:
        if not self.spec.contains(ix, iy):
            return True
        return bool(self.occupied[iy, ix])

    def occupied_world(self, x: float, y: float) -> bool:
        ix, iy = world_to_cell(self.spec, x, y)
        return self.occupied_cell(ix, iy)


def inflate(m: MultiLayerMap, radius: float) -> InflatedGrid:
    """Grow fused-occupied cells: a cell is inflated-occupied iff some
    fused-occupied cell center lies within `radius` of its center.

    Computed with a Euclidean distance transform; cheap enough to recompute
    every planning cycle.
    """
    if radius < 0:
        raise ValueError("inflation radius must be >= 0")
    occ = fused_occupancy(m)
    if radius == 0 or not occ.any():
        return InflatedGrid(m.spec, occ)
    dist = ndimage.distance_transform_edt(~occ, sampling=m.spec.resolution)
    # Tiny epsilon keeps cells at exactly `radius` inside the disk despite
    # the sqrt rounding in the transform.
    return InflatedGrid(m.spec, dist <= radius + 1e-9)


def bordered_static_layer(spec: GridSpec) -> StaticLayer:
    """Static layer with a one-cell occupied border (simple walled rectangle)."""
    cells = np.zeros((spec.height, spec.width), dtype=np.uint8)
    cells[0, :] = 1
    cells[-1, :] = 1
    cells[:, 0] = 1
    cells[:, -1] = 1
    return StaticLayer(spec, cells)


# Static map file format:
#   line 1: "width height resolution origin_x origin_y"
#   then `height` rows of `width` characters, '#' occupied and '.' free,
#   top row first (the file reads like a picture with +y up).

def save_static_map(layer: StaticLayer, path) -> None:
    spec = layer.spec
    lines = [
        f"{spec.width} {spec.height} {spec.resolution!r} {spec.origin_x!r} {spec.origin_y!r}"
    ]
    for iy in range(spec.height - 1, -1, -1):
        lines.append("".join("#" if v else "." for v in layer.cells[iy]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_static_map(path) -> StaticLayer:
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise ValueError(f"{path}: empty map file")
    header = lines[0].split()
    if len(header) != 5:
        raise ValueError(f"{path}: header must be 'width height resolution origin_x origin_y'")
    width, height = int(header[0]), int(header[1])
    spec = GridSpec(float(header[2]), float(header[3]), float(header[4]), width, height)
    rows = lines[1 : 1 + height]
    if len(rows) != height:
        raise ValueError(f"{path}: expected {height} grid rows, found {len(rows)}")
    cells = np.zeros((height, width), dtype=np.uint8)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: row {i + 1} has {len(row)} cells, expected {width}")
        if set(row) - {"#", "."}:
            raise ValueError(f"{path}: row {i + 1} contains characters other than '#' and '.'")
        cells[height - 1 - i] = [1 if ch == "#" else 0 for ch in row]
    return StaticLayer(spec, cells)
