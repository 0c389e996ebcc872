"""Point-cloud projection: camera clouds into the LiDAR frame, then onto the scan plane.

The LiDAR frame has z pointing up with its origin on the scanning plane, so
dropping z projects a cloud onto that plane. A height band keeps obstacle
returns (chair seats, torsos) while discarding floor and ceiling points.
Planar points are binned by bearing into a pseudo-scan, the shared
representation both real LiDAR scans and projected camera data use when
updating the costmap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .geometry import RigidTransform, transform_points

# Height band (meters, relative to the LiDAR plane) kept by default: drops
# floor returns and ceilings while keeping chair seats and human torsos.
DEFAULT_Z_BAND = (-0.05, 1.60)


class Frame(Enum):
    CAMERA1 = "camera1"
    CAMERA2 = "camera2"
    LIDAR = "lidar"


@dataclass
class PointCloud:
    frame_id: Frame
    points: np.ndarray  # (N, 3) float64, meters

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite points")
        self.points = pts


@dataclass
class PlanarPoints:
    """Points on the scanning plane (x, y in the LiDAR frame; z is 0 by construction)."""

    points: np.ndarray  # (N, 2)

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class ScanGrid:
    """Angular binning layout shared by LiDAR scans and projected pseudo-scans."""

    angle_min: float
    angle_max: float
    angular_resolution: float
    max_range: float

    def __post_init__(self) -> None:
        if self.angular_resolution <= 0:
            raise ValueError("angular_resolution must be > 0")
        if self.angle_max <= self.angle_min:
            raise ValueError("angle_max must exceed angle_min")
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")

    @property
    def n_bins(self) -> int:
        # 1e-9 guard keeps exact multiples (e.g. 240 deg / 1 deg) from
        # flooring down through float error.
        span = (self.angle_max - self.angle_min) / self.angular_resolution
        return int(math.floor(span + 1e-9)) + 1

    def angles(self) -> np.ndarray:
        return self.angle_min + self.angular_resolution * np.arange(self.n_bins)


@dataclass
class PseudoScan:
    """Per-bin minimum ranges; empty bins hold +inf, misses hold max_range."""

    grid: ScanGrid
    ranges: np.ndarray

    def __post_init__(self) -> None:
        r = np.asarray(self.ranges, dtype=float)
        if r.shape != (self.grid.n_bins,):
            raise ValueError(
                f"ranges length {r.shape} does not match grid bin count {self.grid.n_bins}"
            )
        finite = r[np.isfinite(r)]
        if finite.size and (np.any(finite <= 0) or np.any(finite > self.grid.max_range)):
            raise ValueError("finite ranges must lie in (0, max_range]")
        self.ranges = r

    @property
    def angle_min(self) -> float:
        return self.grid.angle_min

    @property
    def max_range(self) -> float:
        return self.grid.max_range

    @property
    def angular_resolution(self) -> float:
        return self.grid.angular_resolution


def cloud_to_lidar_frame(cloud: PointCloud, extrinsic: RigidTransform) -> PointCloud:
    """Map a camera cloud into the LiDAR frame: P_L = extrinsic applied to P_c."""
    return PointCloud(Frame.LIDAR, transform_points(extrinsic, cloud.points))


def flatten(cloud: PointCloud, z_band: tuple[float, float] = DEFAULT_Z_BAND) -> PlanarPoints:
    """Project a LiDAR-frame cloud onto the scanning plane.

    Keeps points with z in [z_lo, z_hi] and emits their (x, y); everything
    else is discarded.
    """
    if cloud.frame_id != Frame.LIDAR:
        raise ValueError(f"flatten expects a LiDAR-frame cloud, got {cloud.frame_id}")
    z_lo, z_hi = z_band
    if z_lo >= z_hi:
        raise ValueError("z band must satisfy z_lo < z_hi")
    z = cloud.points[:, 2]
    keep = (z >= z_lo) & (z <= z_hi)
    return PlanarPoints(cloud.points[keep, :2])


def bin_to_pseudo_scan(points: PlanarPoints, grid: ScanGrid) -> PseudoScan:
    """Bin planar points by bearing, keeping the minimum range per bin.

    Points outside the angle range, beyond max_range, or at zero range are
    discarded. The minimum-range rule is conservative: the nearest
    obstruction in a bin wins.
    """
    ranges = np.full(grid.n_bins, np.inf)
    pts = points.points
    if pts.shape[0] == 0:
        return PseudoScan(grid, ranges)
    r = np.hypot(pts[:, 0], pts[:, 1])
    ang = np.arctan2(pts[:, 1], pts[:, 0])
    keep = (r > 0) & (r <= grid.max_range) & (ang >= grid.angle_min) & (ang <= grid.angle_max)
    bins = np.floor((ang[keep] - grid.angle_min) / grid.angular_resolution).astype(int)
    ok = (bins >= 0) & (bins < grid.n_bins)
    np.minimum.at(ranges, bins[ok], r[keep][ok])
    return PseudoScan(grid, ranges)


def merge_planar(*parts: PlanarPoints) -> PlanarPoints:
    """Concatenate planar point sets (e.g. the two camera projections)."""
    arrays = [p.points for p in parts if p.points.shape[0]]
    if not arrays:
        return PlanarPoints(np.empty((0, 2)))
    return PlanarPoints(np.vstack(arrays))
