"""Deterministic world, sensor, and robot simulation.

The world is a walled rectangle [0, width] x [0, height] containing boxes,
chairs, and moving people. The LiDAR scans a horizontal plane at its mount
height; chairs are the interesting case because their seat slab sits above
that plane, so the LiDAR sees only the legs while the tilted depth cameras
see the whole seat. All randomness flows through explicit seeds, so a fixed
(scenario, seed) reproduces every scan, cloud, and trajectory bit for bit.

Frames: the robot base frame sits on the ground (z = 0) with x forward and
z up. The LiDAR frame is the base frame lifted to the mount height. Camera
frames have x along the optical axis and z up, pitched up by the tilt angle
and yawed outward on their mounts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .costmap import GridSpec, StaticLayer, bordered_static_layer, load_static_map
from .geometry import Pose2D, RigidTransform, Vec3, compose, invert, rotation_about_axis
from .planner import RobotLimits, VelocityCommand, step_kinematics
from .projection import Frame, PointCloud, PseudoScan, ScanGrid


@dataclass(frozen=True)
class Box:
    """Axis-aligned box standing on the floor."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    height: float

    def __post_init__(self) -> None:
        if self.x_min >= self.x_max or self.y_min >= self.y_max or self.height <= 0:
            raise ValueError("box extents must be positive")


@dataclass(frozen=True)
class Chair:
    """Seat slab on four legs; the seat may overhang the leg span."""

    center_x: float
    center_y: float
    seat_size_x: float
    seat_size_y: float
    seat_lo: float
    seat_hi: float
    leg_radius: float
    leg_height: float
    leg_span_x: float
    leg_span_y: float

    def __post_init__(self) -> None:
        if not (0 < self.seat_lo < self.seat_hi):
            raise ValueError("seat band must satisfy 0 < seat_lo < seat_hi")
        if self.leg_radius <= 0 or self.leg_height <= 0:
            raise ValueError("leg dimensions must be positive")

    @property
    def seat_bounds(self) -> tuple[float, float, float, float]:
        return (
            self.center_x - self.seat_size_x / 2,
            self.center_y - self.seat_size_y / 2,
            self.center_x + self.seat_size_x / 2,
            self.center_y + self.seat_size_y / 2,
        )

    def leg_centers(self) -> list[tuple[float, float]]:
        hx, hy = self.leg_span_x / 2, self.leg_span_y / 2
        return [
            (self.center_x + sx * hx, self.center_y + sy * hy)
            for sx in (-1, 1)
            for sy in (-1, 1)
        ]


def canonical_chair(center_x: float, center_y: float) -> Chair:
    """Typical office chair: 0.45 m seat at 0.42-0.48 m on thin 0.42 m legs,
    which hides the seat from a 0.2 m scanning plane."""
    return Chair(
        center_x=center_x,
        center_y=center_y,
        seat_size_x=0.45,
        seat_size_y=0.45,
        seat_lo=0.42,
        seat_hi=0.48,
        leg_radius=0.02,
        leg_height=0.42,
        leg_span_x=0.37,
        leg_span_y=0.37,
    )


@dataclass
class Person:
    """Cylinder walking a waypoint polyline at constant speed, then stopping."""

    waypoints: list[tuple[float, float]]
    speed: float = 0.5
    radius: float = 0.25
    height: float = 1.7
    progress: float = 0.0  # distance traveled along the polyline

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise ValueError("person needs at least one waypoint")
        if self.speed < 0:
            raise ValueError("person speed must be >= 0")

    def position(self) -> tuple[float, float]:
        remaining = self.progress
        pts = self.waypoints
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            seg = math.hypot(x1 - x0, y1 - y0)
            if remaining <= seg or seg == 0:
                f = 0.0 if seg == 0 else remaining / seg
                return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
            remaining -= seg
        return pts[-1]


Obstacle = Box | Chair | Person


@dataclass
class World:
    """Walled rectangle [0, width] x [0, height] plus obstacles."""

    width: float
    height: float
    obstacles: list[Obstacle] = field(default_factory=list)
    map_file: str | None = None

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("world bounds must be positive")

    def static_layer(self, resolution: float) -> StaticLayer:
        if self.map_file is not None:
            return load_static_map(self.map_file)
        spec = GridSpec(
            resolution,
            0.0,
            0.0,
            int(round(self.width / resolution)),
            int(round(self.height / resolution)),
        )
        return bordered_static_layer(spec)


@dataclass(frozen=True)
class LidarModel:
    fov: float = math.radians(240.0)
    angular_resolution: float = math.radians(1.0)
    max_range: float = 8.0
    mount_height: float = 0.2
    noise_sigma: float = 0.01

    def __post_init__(self) -> None:
        if not (0 < self.fov <= math.tau):
            raise ValueError("fov must lie in (0, 2*pi]")
        if self.max_range <= 0:
            raise ValueError("max_range must be > 0")

    def scan_grid(self) -> ScanGrid:
        return ScanGrid(-self.fov / 2, self.fov / 2, self.angular_resolution, self.max_range)


@dataclass(frozen=True)
class CameraModel:
    frame: Frame = Frame.CAMERA1
    hfov: float = math.radians(87.0)
    vfov: float = math.radians(58.0)
    cols: int = 160
    rows: int = 120
    tilt: float = math.radians(15.0)  # pitched upward
    mount_x: float = 0.0
    mount_y: float = 0.15
    mount_z: float = 0.3
    yaw: float = math.radians(42.0)  # yawed outward from the heading
    max_range: float = 4.0
    noise_sigma: float = 0.01

    def __post_init__(self) -> None:
        if not (0 < self.hfov < math.pi and 0 < self.vfov < math.pi):
            raise ValueError("camera FOVs must lie in (0, pi)")
        if self.cols < 2 or self.rows < 2:
            raise ValueError("ray grid needs at least 2x2 rays")


@dataclass(frozen=True)
class RobotState:
    pose: Pose2D
    commanded: VelocityCommand = VelocityCommand(0.0, 0.0)
    actual: VelocityCommand = VelocityCommand(0.0, 0.0)
    radius: float = 0.2
    collided: bool = False


def base_from_camera(model: CameraModel) -> RigidTransform:
    """Camera-to-robot-base transform from the mount geometry."""
    yaw = rotation_about_axis(Vec3(0, 0, 1), model.yaw)
    pitch = rotation_about_axis(Vec3(0, 1, 0), -model.tilt)
    rotation = compose(yaw, pitch).rotation
    return RigidTransform(rotation, np.array([model.mount_x, model.mount_y, model.mount_z]))


def lidar_from_camera(camera: CameraModel, lidar: LidarModel) -> RigidTransform:
    """Nominal camera-to-LiDAR extrinsic (the Eq.-(3)-style transform)."""
    base_from_lidar = RigidTransform.from_translation(0.0, 0.0, lidar.mount_height)
    return compose(invert(base_from_lidar), base_from_camera(camera))


def camera_from_camera(cam_a: CameraModel, cam_b: CameraModel) -> RigidTransform:
    """True transform mapping camera-b coordinates into camera-a's frame."""
    return compose(invert(base_from_camera(cam_a)), base_from_camera(cam_b))


# --- vectorized ray intersections -----------------------------------------

_EPS_T = 1e-9
_TINY_DIR = 1e-12


def _ray_bounds_2d(ox, oy, dx, dy, width, height):
    """Distance to the boundary of [0,width]x[0,height] from inside."""
    with np.errstate(divide="ignore"):
        tx = np.where(dx > 0, (width - ox) / dx, np.where(dx < 0, -ox / dx, np.inf))
        ty = np.where(dy > 0, (height - oy) / dy, np.where(dy < 0, -oy / dy, np.inf))
    return np.minimum(tx, ty)


def _ray_aabb_2d(ox, oy, dx, dy, x0, y0, x1, y1):
    dxs = np.where(np.abs(dx) < _TINY_DIR, _TINY_DIR, dx)
    dys = np.where(np.abs(dy) < _TINY_DIR, _TINY_DIR, dy)
    tx1 = (x0 - ox) / dxs
    tx2 = (x1 - ox) / dxs
    ty1 = (y0 - oy) / dys
    ty2 = (y1 - oy) / dys
    tmin = np.maximum(np.minimum(tx1, tx2), np.minimum(ty1, ty2))
    tmax = np.minimum(np.maximum(tx1, tx2), np.maximum(ty1, ty2))
    hit = (tmax >= tmin) & (tmax > 0) & (tmin > _EPS_T)
    return np.where(hit, tmin, np.inf)


def _ray_circle_2d(ox, oy, dx, dy, cx, cy, radius):
    a = dx * dx + dy * dy
    fx = ox - cx
    fy = oy - cy
    b = 2.0 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - radius * radius
    disc = b * b - 4.0 * a * c
    ok = (disc >= 0) & (a > 0)
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t = np.where(ok, (-b - sq) / (2.0 * np.where(a > 0, a, 1.0)), np.inf)
    return np.where(ok & (t > _EPS_T), t, np.inf)


def _ray_aabb_3d(o, d, lo, hi):
    ds = np.where(np.abs(d) < _TINY_DIR, _TINY_DIR, d)
    t1 = (lo[None, :] - o[None, :]) / ds
    t2 = (hi[None, :] - o[None, :]) / ds
    tmin = np.max(np.minimum(t1, t2), axis=1)
    tmax = np.min(np.maximum(t1, t2), axis=1)
    hit = (tmax >= tmin) & (tmax > 0) & (tmin > _EPS_T)
    return np.where(hit, tmin, np.inf)


def _ray_cylinder_3d(o, d, cx, cy, radius, z_lo, z_hi):
    t = _ray_circle_2d(o[0], o[1], d[:, 0], d[:, 1], cx, cy, radius)
    z = o[2] + t * d[:, 2]
    ok = np.isfinite(t) & (z >= z_lo) & (z <= z_hi)
    return np.where(ok, t, np.inf)


def _cross_sections(world: World, plane_z: float):
    """2D primitives cut by the horizontal plane at plane_z."""
    rects: list[tuple[float, float, float, float]] = []
    circles: list[tuple[float, float, float]] = []
    for ob in world.obstacles:
        if isinstance(ob, Box):
            if plane_z < ob.height:
                rects.append((ob.x_min, ob.y_min, ob.x_max, ob.y_max))
        elif isinstance(ob, Chair):
            if ob.seat_lo <= plane_z <= ob.seat_hi:
                rects.append(ob.seat_bounds)
            if plane_z < ob.leg_height:
                circles.extend((cx, cy, ob.leg_radius) for cx, cy in ob.leg_centers())
        elif isinstance(ob, Person):
            if plane_z < ob.height:
                px, py = ob.position()
                circles.append((px, py, ob.radius))
    return rects, circles


def raycast_lidar(world: World, robot: RobotState, model: LidarModel, seed) -> PseudoScan:
    """Scan the horizontal plane at the mount height.

    One ray per angular step across the FOV; the nearest wall or obstacle
    cross-section wins, Gaussian range noise is drawn deterministically from
    the seed, and misses report max_range exactly.
    """
    grid = model.scan_grid()
    angles = robot.pose.theta + grid.angles()
    dx, dy = np.cos(angles), np.sin(angles)
    ox, oy = robot.pose.x, robot.pose.y

    t = _ray_bounds_2d(ox, oy, dx, dy, world.width, world.height)
    rects, circles = _cross_sections(world, model.mount_height)
    for x0, y0, x1, y1 in rects:
        t = np.minimum(t, _ray_aabb_2d(ox, oy, dx, dy, x0, y0, x1, y1))
    for cx, cy, r in circles:
        t = np.minimum(t, _ray_circle_2d(ox, oy, dx, dy, cx, cy, r))

    noise = np.random.default_rng(seed).normal(0.0, model.noise_sigma, size=t.shape)
    hit = t < model.max_range
    ranges = np.where(hit, np.clip(t + noise, 1e-6, model.max_range), model.max_range)
    return PseudoScan(grid, ranges)


def camera_ray_directions(model: CameraModel) -> np.ndarray:
    """Unit ray directions in the camera frame, rows x cols flattened."""
    az = np.linspace(-model.hfov / 2, model.hfov / 2, model.cols)
    el = np.linspace(-model.vfov / 2, model.vfov / 2, model.rows)
    a, e = np.meshgrid(az, el)
    dirs = np.stack(
        [np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1
    )
    return dirs.reshape(-1, 3)


def render_depth_cloud(
    world: World, robot: RobotState, model: CameraModel, seed=None
) -> PointCloud:
    """Cast the camera's ray grid through the tilted frustum.

    Rays intersect the floor plane, the full-height boundary walls, and the
    3D solids of every obstacle; hit points come back in the camera frame
    and misses (nothing within max_range) are omitted. Range noise is drawn
    from the seed along each ray; pass None for a noiseless render.
    """
    dirs_cam = camera_ray_directions(model)
    pose = robot.pose
    cam_in_base = base_from_camera(model)
    base_rot = rotation_about_axis(Vec3(0, 0, 1), pose.theta)
    world_from_cam = compose(
        RigidTransform(base_rot.rotation, np.array([pose.x, pose.y, 0.0])), cam_in_base
    )
    o = world_from_cam.translation
    d = dirs_cam @ world_from_cam.rotation.T

    # Floor plane z = 0.
    with np.errstate(divide="ignore", invalid="ignore"):
        t_floor = np.where(d[:, 2] < 0, -o[2] / d[:, 2], np.inf)
    t = np.where(t_floor > _EPS_T, t_floor, np.inf)
    # Boundary walls (full height).
    t_wall = _ray_bounds_2d(o[0], o[1], d[:, 0], d[:, 1], world.width, world.height)
    t = np.minimum(t, np.where(t_wall > _EPS_T, t_wall, np.inf))

    for ob in world.obstacles:
        if isinstance(ob, Box):
            lo = np.array([ob.x_min, ob.y_min, 0.0])
            hi = np.array([ob.x_max, ob.y_max, ob.height])
            t = np.minimum(t, _ray_aabb_3d(o, d, lo, hi))
        elif isinstance(ob, Chair):
            x0, y0, x1, y1 = ob.seat_bounds
            lo = np.array([x0, y0, ob.seat_lo])
            hi = np.array([x1, y1, ob.seat_hi])
            t = np.minimum(t, _ray_aabb_3d(o, d, lo, hi))
            for cx, cy in ob.leg_centers():
                t = np.minimum(
                    t, _ray_cylinder_3d(o, d, cx, cy, ob.leg_radius, 0.0, ob.leg_height)
                )
        elif isinstance(ob, Person):
            px, py = ob.position()
            t = np.minimum(t, _ray_cylinder_3d(o, d, px, py, ob.radius, 0.0, ob.height))

    hit = t <= model.max_range
    if seed is not None and model.noise_sigma > 0:
        noise = np.random.default_rng(seed).normal(0.0, model.noise_sigma, size=t.shape)
        t = np.where(hit, np.clip(t + noise, 1e-6, model.max_range), t)
    points_cam = t[hit, None] * dirs_cam[hit]
    return PointCloud(model.frame, points_cam)


def footprint_distance(ob: Obstacle, x: float, y: float) -> float:
    """Distance from a point to an obstacle's 2D footprint (0 inside)."""
    if isinstance(ob, Box):
        return _aabb_distance(x, y, ob.x_min, ob.y_min, ob.x_max, ob.y_max)
    if isinstance(ob, Chair):
        d = _aabb_distance(x, y, *ob.seat_bounds)
        for cx, cy in ob.leg_centers():
            d = min(d, max(math.hypot(x - cx, y - cy) - ob.leg_radius, 0.0))
        return d
    px, py = ob.position()
    return max(math.hypot(x - px, y - py) - ob.radius, 0.0)


def _aabb_distance(x, y, x0, y0, x1, y1) -> float:
    dx = max(x0 - x, 0.0, x - x1)
    dy = max(y0 - y, 0.0, y - y1)
    return math.hypot(dx, dy)


def clearance(world: World, x: float, y: float) -> float:
    """Distance from a point to the nearest wall plane or obstacle footprint."""
    d = min(x, world.width - x, y, world.height - y)
    for ob in world.obstacles:
        d = min(d, footprint_distance(ob, x, y))
    return d


def step_world(
    world: World,
    robot: RobotState,
    cmd: VelocityCommand,
    dt: float,
    limits: RobotLimits,
) -> RobotState:
    """Advance one tick: rate-limit velocities, integrate the pose, move
    people along their paths, and flag collisions.

    Actual velocities approach the (limit-clipped) command at the
    acceleration bound and back off at the deceleration bound. The collision
    flag trips when the robot center comes within its radius of any wall
    plane or obstacle footprint. Mutates person progress in the world.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")

    def toward(current: float, target: float, up: float, down: float) -> float:
        if target > current:
            return min(current + up * dt, target)
        return max(current - down * dt, target)

    target_v = min(max(cmd.v, limits.v_min), limits.v_max)
    target_w = min(max(cmd.w, limits.w_min), limits.w_max)
    actual = VelocityCommand(
        toward(robot.actual.v, target_v, limits.acc_v, limits.dec_v),
        toward(robot.actual.w, target_w, limits.acc_w, limits.dec_w),
    )
    pose = step_kinematics(robot.pose, actual, dt)

    for ob in world.obstacles:
        if isinstance(ob, Person):
            ob.progress += ob.speed * dt

    collided = clearance(world, pose.x, pose.y) < robot.radius
    return replace(robot, pose=pose, commanded=cmd, actual=actual, collided=collided)


def localize(robot: RobotState, sigma_xy: float, sigma_theta: float, seed) -> Pose2D:
    """Ground truth plus zero-mean Gaussian noise on position and heading.

    Stands in for the SLAM stack; deterministic per seed.
    """
    if sigma_xy < 0 or sigma_theta < 0:
        raise ValueError("noise sigmas must be >= 0")
    rng = np.random.default_rng(seed)
    nx, ny = rng.normal(0.0, sigma_xy, size=2)
    nt = rng.normal(0.0, sigma_theta)
    return Pose2D(robot.pose.x + nx, robot.pose.y + ny, robot.pose.theta + nt)
