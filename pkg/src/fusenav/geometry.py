"""Rigid-body transform algebra: SE(3) value types, Rodrigues rotations, planar poses.

Rotations are stored as 3x3 matrices throughout; the only rotation
parametrization exposed is axis/angle construction. All types are immutable
and all operations are pure functions, so values can be shared freely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Orthonormality / determinant tolerance for a valid rotation matrix.
ORTHO_TOL = 1e-9


def wrap_angle(theta: float) -> float:
    """Normalize an angle into (-pi, pi]."""
    w = math.remainder(theta, math.tau)
    if w <= -math.pi:
        w += math.tau
    return w


@dataclass(frozen=True)
class Vec3:
    """A 3D point or vector in meters."""

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError("Vec3 components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))


def _rotation_residual(r: np.ndarray) -> float:
    return float(np.max(np.abs(r.T @ r - np.eye(3))))


def _nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Project a near-rotation matrix onto SO(3) (polar decomposition via SVD)."""
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if np.linalg.det(r) < 0:
        r = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return r


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """SE(3) transform: p_out = rotation @ p_in + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        r = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float).reshape(3)
        if r.shape != (3, 3):
            raise ValueError(f"rotation must be 3x3, got {r.shape}")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(t))):
            raise ValueError("transform entries must be finite")
        if _rotation_residual(r) > ORTHO_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > ORTHO_TOL:
            raise ValueError("rotation determinant differs from +1 by more than 1e-9")
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    @staticmethod
    def from_translation(x: float, y: float, z: float) -> "RigidTransform":
        return RigidTransform(np.eye(3), np.array([x, y, z], dtype=float))


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Chain two transforms: (a o b)(p) = a(b(p)).

    Equivalent to the homogeneous 4x4 product of a's matrix times b's.
    Re-orthonormalizes only when the product drifts beyond 1e-9, which can
    happen over long chains.
    """
    r = a.rotation @ b.rotation
    t = a.rotation @ b.translation + a.translation
    if _rotation_residual(r) > ORTHO_TOL:
        r = _nearest_rotation(r)
    return RigidTransform(r, t)


def invert(t: RigidTransform) -> RigidTransform:
    """Inverse transform: rotation R^T and translation -R^T t."""
    rt = t.rotation.T
    return RigidTransform(rt, -(rt @ t.translation))


def transform_point(t: RigidTransform, p: Vec3) -> Vec3:
    """Apply a transform to a single point: R p + T."""
    return Vec3.from_array(t.rotation @ p.as_array() + t.translation)


def transform_points(t: RigidTransform, pts: np.ndarray) -> np.ndarray:
    """Apply a transform to an (N, 3) array of points."""
    pts = np.asarray(pts, dtype=float)
    return pts @ t.rotation.T + t.translation


def rotation_about_axis(axis: Vec3, angle: float) -> RigidTransform:
    """Rodrigues rotation about a unit axis, zero translation.

    Raises ValueError if the axis norm deviates from 1 by more than 1e-9.
    """
    a = axis.as_array()
    if abs(np.linalg.norm(a) - 1.0) > 1e-9:
        raise ValueError("rotation axis must be a unit vector")
    k = np.array(
        [
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ]
    )
    r = np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)
    return RigidTransform(r, np.zeros(3))


def rotation_angle(r: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, in [0, pi]."""
    c = (float(np.trace(r)) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


@dataclass(frozen=True)
class Pose2D:
    """Planar pose (x, y, heading); theta is kept normalized in (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise ValueError("Pose2D fields must be finite")
        object.__setattr__(self, "theta", wrap_angle(self.theta))
