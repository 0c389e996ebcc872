"""Camera-to-camera extrinsic calibration by chaining marker-relative poses.

Each camera observes a shared fiducial marker; chaining one camera's pose
against the other's inverse yields the camera-to-camera transform. With many
observation pairs the per-pair transforms are averaged: arithmetic mean for
translation, chordal mean (elementwise average projected back onto SO(3))
for rotation. Marker detection and PnP solving happen upstream; this module
only consumes poses.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .geometry import (
    RigidTransform,
    _nearest_rotation,
    compose,
    invert,
    rotation_about_axis,
    rotation_angle,
    Vec3,
)


class CameraId(Enum):
    CAM1 = "cam1"
    CAM2 = "cam2"
    EXTERNAL = "external"


@dataclass(frozen=True)
class MarkerObservation:
    """One camera pose expressed via the marker frame, with capture time."""

    camera_id: CameraId
    pose: RigidTransform
    timestamp: float


@dataclass(frozen=True)
class ExtrinsicEstimate:
    """Averaged camera-to-camera transform plus scatter of the input pairs.

    rotation_residual is the RMS geodesic angle (radians) and
    translation_residual the RMS Euclidean distance (meters) of the per-pair
    transforms from the mean.
    """

    transform: RigidTransform
    rotation_residual: float
    translation_residual: float
    sample_count: int

    def __post_init__(self) -> None:
        if self.rotation_residual < 0 or self.translation_residual < 0:
            raise ValueError("residuals must be non-negative")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")


def chain_extrinsic(pose_a: RigidTransform, pose_b: RigidTransform) -> RigidTransform:
    """Transform mapping camera-b coordinates into camera-a coordinates.

    Both poses are marker-relative camera poses; the marker frame cancels:
    aMb = aMo * (bMo)^-1.
    """
    return compose(pose_a, invert(pose_b))


def estimate_extrinsic(
    pairs: list[tuple[MarkerObservation, MarkerObservation]],
) -> ExtrinsicEstimate:
    """Average the chained transform over observation pairs (a_i, b_i).

    Returns the mean aMb. Raises ValueError on empty input.
    """
    if not pairs:
        raise ValueError("no observations")
    transforms = [chain_extrinsic(a.pose, b.pose) for a, b in pairs]
    rotations = np.stack([t.rotation for t in transforms])
    translations = np.stack([t.translation for t in transforms])

    mean_rotation = _nearest_rotation(rotations.mean(axis=0))
    mean_translation = translations.mean(axis=0)

    rot_dev = np.array(
        [rotation_angle(t.rotation @ mean_rotation.T) for t in transforms]
    )
    trans_dev = np.linalg.norm(translations - mean_translation, axis=1)
    return ExtrinsicEstimate(
        transform=RigidTransform(mean_rotation, mean_translation),
        rotation_residual=float(np.sqrt(np.mean(rot_dev**2))),
        translation_residual=float(np.sqrt(np.mean(trans_dev**2))),
        sample_count=len(pairs),
    )


def _random_unit(rng: np.random.Generator) -> Vec3:
    v = rng.standard_normal(3)
    v /= np.linalg.norm(v)
    return Vec3.from_array(v)


def _random_transform(rng: np.random.Generator) -> RigidTransform:
    r = rotation_about_axis(_random_unit(rng), rng.uniform(-np.pi, np.pi))
    return RigidTransform(r.rotation, rng.uniform(-1.0, 1.0, size=3))


def synth_marker_observations(
    ground_truth: RigidTransform,
    n: int,
    rot_sigma: float,
    trans_sigma: float,
    seed,
) -> list[tuple[MarkerObservation, MarkerObservation]]:
    """Generate n synthetic observation pairs whose chained transform scatters
    around ground_truth.

    Pair i is built from a random marker-relative pose M_i: camera b observes
    M_i exactly, camera a observes G * N_i * M_i where N_i is a small noise
    transform (rotation angle ~ N(0, rot_sigma) about a uniform axis,
    translation ~ N(0, trans_sigma) per component). The chained transform is
    then G * N_i, so per-pair deviations from G match the configured sigmas
    directly. Deterministic for a fixed seed; zero sigmas reproduce G exactly.
    """
    if n < 1:
        raise ValueError("need n >= 1 observation pairs")
    if rot_sigma < 0 or trans_sigma < 0:
        raise ValueError("noise sigmas must be >= 0")
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        marker_pose = _random_transform(rng)
        noise_rot = rotation_about_axis(_random_unit(rng), rng.normal(0.0, rot_sigma))
        noise = RigidTransform(noise_rot.rotation, rng.normal(0.0, trans_sigma, size=3))
        pose_a = compose(compose(ground_truth, noise), marker_pose)
        t = 0.1 * i
        pairs.append(
            (
                MarkerObservation(CameraId.CAM1, pose_a, t),
                MarkerObservation(CameraId.CAM2, marker_pose, t),
            )
        )
    return pairs


def pair_observations(
    observations: list[MarkerObservation],
    first: CameraId = CameraId.CAM1,
    second: CameraId = CameraId.CAM2,
) -> list[tuple[MarkerObservation, MarkerObservation]]:
    """Pair observations of two cameras by order of appearance (not timestamp)."""
    a = [o for o in observations if o.camera_id == first]
    b = [o for o in observations if o.camera_id == second]
    return list(zip(a, b))


# Marker-pose log: one record per line,
#   camera_id timestamp r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz
# whitespace-separated, '#' starts a comment.

def read_marker_log(path) -> list[MarkerObservation]:
    observations = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 14:
            raise ValueError(f"{path}:{lineno}: expected 14 fields, got {len(fields)}")
        try:
            camera_id = CameraId(fields[0].lower())
        except ValueError:
            raise ValueError(f"{path}:{lineno}: unknown camera id {fields[0]!r}") from None
        values = [float(f) for f in fields[1:]]
        rotation = np.array(values[1:10]).reshape(3, 3)
        translation = np.array(values[10:13])
        observations.append(
            MarkerObservation(camera_id, RigidTransform(rotation, translation), values[0])
        )
    return observations


def write_marker_log(path, observations: list[MarkerObservation]) -> None:
    lines = ["# camera_id timestamp r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz"]
    for o in observations:
        nums = [o.timestamp, *o.pose.rotation.ravel(), *o.pose.translation]
        lines.append(o.camera_id.value + " " + " ".join(repr(float(v)) for v in nums))
    Path(path).write_text("\n".join(lines) + "\n")
