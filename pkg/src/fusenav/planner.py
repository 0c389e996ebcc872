"""Dynamic-window velocity selection over an inflated occupancy grid.

Each control cycle samples (v, w) pairs from the reachable velocity window,
drops pairs that could not stop before their first collision, and picks the
pair maximizing

    G = alpha * heading + beta * dist + gamma * vel

where heading rewards pointing at the goal at the rollout end pose, dist
rewards clearance along the arc (saturating at the expansion radius), and
vel rewards speed. The search is deterministic: exact ties are broken by
higher v, then smaller |w|, then lower sample index.

Contract details test oracles rely on:
  * sample i of n over [lo, hi] is  lo + i * (hi - lo) / (n - 1);
  * candidate index is  iv * w_samples + iw  (v-major);
  * rollouts sample the exact circular arc at times t_k = k * (horizon / n)
    for k = 1..n with n = ceil(|v| * horizon / (resolution / 2)), using the
    straight-line form when |w| < 1e-12;
  * collision distances are capped at DIST_CAP before both the
    admissibility check and the dist score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .costmap import InflatedGrid
from .geometry import Pose2D, wrap_angle

# Stands in for an unobstructed rollout when scoring; larger than any sensor
# range in scope so it never binds.
DIST_CAP = 10.0

# Angular velocities below this follow the straight-line kinematic form.
STRAIGHT_EPS = 1e-12


@dataclass(frozen=True)
class RobotLimits:
    """Velocity and acceleration envelope of the drive."""

    v_min: float = 0.0
    v_max: float = 0.6
    w_min: float = -1.5
    w_max: float = 1.5
    acc_v: float = 0.5
    dec_v: float = 0.5
    acc_w: float = 2.0
    dec_w: float = 2.0

    def __post_init__(self) -> None:
        if self.v_min > self.v_max or self.w_min > self.w_max:
            raise ValueError("velocity bounds are inverted")
        if min(self.acc_v, self.dec_v, self.acc_w, self.dec_w) <= 0:
            raise ValueError("accelerations must be > 0")


@dataclass(frozen=True)
class DwaConfig:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.5
    dt: float = 0.1
    horizon: float = 2.0
    v_samples: int = 21
    w_samples: int = 41
    r_e: float = 0.35  # obstacle expansion radius, meters

    def __post_init__(self) -> None:
        if min(self.alpha, self.beta, self.gamma) < 0 or self.alpha + self.beta + self.gamma <= 0:
            raise ValueError("weights must be >= 0 with a positive sum")
        if self.dt <= 0 or self.horizon < self.dt:
            raise ValueError("need dt > 0 and horizon >= dt")
        if self.v_samples < 2 or self.w_samples < 2:
            raise ValueError("need at least 2 samples per axis")
        if self.r_e < 0:
            raise ValueError("expansion radius must be >= 0")


@dataclass(frozen=True)
class VelocityCommand:
    v: float
    w: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v) and math.isfinite(self.w)):
            raise ValueError("velocity command must be finite")


STOP = VelocityCommand(0.0, 0.0)


@dataclass(frozen=True)
class WindowBounds:
    """Reachable velocity box V_m intersected with the dynamic window V_d."""

    v_lo: float
    v_hi: float
    w_lo: float
    w_hi: float

    @property
    def is_empty(self) -> bool:
        return self.v_lo > self.v_hi or self.w_lo > self.w_hi


def step_kinematics(pose: Pose2D, cmd: VelocityCommand, dt: float) -> Pose2D:
    """Discrete unicycle update over one sampling interval."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    return Pose2D(
        pose.x + cmd.v * dt * math.cos(pose.theta),
        pose.y + cmd.v * dt * math.sin(pose.theta),
        pose.theta + cmd.w * dt,
    )


def dynamic_window(current: VelocityCommand, limits: RobotLimits, dt: float) -> WindowBounds:
    """Velocities reachable within dt under the acceleration envelope."""
    return WindowBounds(
        v_lo=max(limits.v_min, current.v - limits.dec_v * dt),
        v_hi=min(limits.v_max, current.v + limits.acc_v * dt),
        w_lo=max(limits.w_min, current.w - limits.dec_w * dt),
        w_hi=min(limits.w_max, current.w + limits.acc_w * dt),
    )


def _arc_position(
    x0: float, y0: float, theta0: float, v: float, w: float, t
):
    """Position on the constant-(v, w) arc at time t (scalar or array t)."""
    if abs(w) < STRAIGHT_EPS:
        c0, s0 = math.cos(theta0), math.sin(theta0)
        return x0 + v * t * c0, y0 + v * t * s0
    r = v / w
    th = theta0 + w * t
    return x0 + r * (np.sin(th) - math.sin(theta0)), y0 - r * (np.cos(th) - math.cos(theta0))


def rollout_distance_to_collision(
    pose: Pose2D, cmd: VelocityCommand, grid: InflatedGrid, horizon: float
) -> float:
    """Arc length traveled before the robot center enters an inflated cell.

    Samples the circular arc in steps of arc length at most half a cell; a
    start pose already in collision returns 0, in-place rotations check the
    start cell only, and an unobstructed rollout returns +inf.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if grid.occupied_world(pose.x, pose.y):
        return 0.0
    if cmd.v == 0.0:
        return math.inf
    n = int(math.ceil(abs(cmd.v) * horizon / (grid.spec.resolution / 2)))
    dt = horizon / n
    for k in range(1, n + 1):
        t = k * dt
        x, y = _arc_position(pose.x, pose.y, pose.theta, cmd.v, cmd.w, t)
        if grid.occupied_world(float(x), float(y)):
            return abs(cmd.v) * t
    return math.inf


def admissible(cmd: VelocityCommand, dis: float, limits: RobotLimits) -> bool:
    """A pair is admissible if it can stop within dis under the deceleration limits."""
    if dis < 0:
        raise ValueError("collision distance must be >= 0")
    return cmd.v <= math.sqrt(2.0 * dis * limits.dec_v) and abs(cmd.w) <= math.sqrt(
        2.0 * dis * limits.dec_w
    )


def heading_score(end_pose: Pose2D, goal: tuple[float, float]) -> float:
    """1 at zero bearing error, 0 when the goal lies directly behind."""
    dx, dy = goal[0] - end_pose.x, goal[1] - end_pose.y
    if math.hypot(dx, dy) < 1e-9:
        return 1.0
    err = abs(wrap_angle(math.atan2(dy, dx) - end_pose.theta))
    return 1.0 - err / math.pi


def dist_score(d_o: float, r: float) -> float:
    """Linear in the obstacle distance below the expansion radius, else 1."""
    if r <= 0:
        raise ValueError("expansion radius must be > 0")
    if d_o < 0:
        raise ValueError("obstacle distance must be >= 0")
    return min(d_o / r, 1.0)


def vel_score(v: float, v_max: float) -> float:
    """Speed preference, v / v_max over [0, v_max]."""
    if v_max <= 0:
        raise ValueError("v_max must be > 0")
    return v / v_max


@dataclass(frozen=True)
class PlanResult:
    best: VelocityCommand
    score: float
    emergency: bool
    n_admissible: int
    window: WindowBounds
    best_dis: float


def _sample_axis(lo: float, hi: float, n: int) -> np.ndarray:
    return lo + np.arange(n) * ((hi - lo) / (n - 1))


def _rollout_batch(
    pose: Pose2D, v: np.ndarray, w: np.ndarray, grid: InflatedGrid, horizon: float
) -> np.ndarray:
    """Vectorized rollout_distance_to_collision over candidate arrays."""
    c = len(v)
    dis = np.full(c, np.inf)
    if grid.occupied_world(pose.x, pose.y):
        dis[:] = 0.0
        return dis
    half_res = grid.spec.resolution / 2
    n = np.ceil(np.abs(v) * horizon / half_res).astype(np.int64)
    moving = n > 0
    if not moving.any():
        return dis
    s = int(n.max())
    dt = horizon / np.maximum(n, 1)
    t = dt[:, None] * np.arange(1, s + 1)[None, :]  # (c, s)
    valid = np.arange(1, s + 1)[None, :] <= n[:, None]

    straight = np.abs(w) < STRAIGHT_EPS
    c0, s0 = math.cos(pose.theta), math.sin(pose.theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(straight, 0.0, v / np.where(straight, 1.0, w))
    th = pose.theta + w[:, None] * t
    x_arc = pose.x + r[:, None] * (np.sin(th) - s0)
    y_arc = pose.y - r[:, None] * (np.cos(th) - c0)
    x_str = pose.x + v[:, None] * t * c0
    y_str = pose.y + v[:, None] * t * s0
    x = np.where(straight[:, None], x_str, x_arc)
    y = np.where(straight[:, None], y_str, y_arc)

    spec = grid.spec
    ix = np.floor((x - spec.origin_x) / spec.resolution).astype(np.int64)
    iy = np.floor((y - spec.origin_y) / spec.resolution).astype(np.int64)
    inside = (ix >= 0) & (ix < spec.width) & (iy >= 0) & (iy < spec.height)
    occ = ~inside  # outside the grid counts as occupied
    occ[inside] = grid.occupied[iy[inside], ix[inside]]
    occ &= valid

    hit_any = occ.any(axis=1)
    first = occ.argmax(axis=1)
    rows = np.flatnonzero(hit_any)
    dis[rows] = np.abs(v[rows]) * t[rows, first[rows]]
    return dis


def select_velocity(
    pose: Pose2D,
    current: VelocityCommand,
    goal: tuple[float, float],
    grid: InflatedGrid,
    limits: RobotLimits,
    config: DwaConfig,
) -> PlanResult:
    """Pick the admissible sampled command maximizing the weighted objective.

    Falls back to a full stop when the window is empty or nothing sampled is
    admissible (the actuator applies maximum deceleration toward it).
    """
    window = dynamic_window(current, limits, config.dt)
    if window.is_empty:
        return PlanResult(STOP, -math.inf, True, 0, window, 0.0)

    vs = _sample_axis(window.v_lo, window.v_hi, config.v_samples)
    ws = _sample_axis(window.w_lo, window.w_hi, config.w_samples)
    v = np.repeat(vs, config.w_samples)
    w = np.tile(ws, config.v_samples)

    dis = np.minimum(_rollout_batch(pose, v, w, grid, config.horizon), DIST_CAP)
    adm = (v <= np.sqrt(2.0 * dis * limits.dec_v)) & (
        np.abs(w) <= np.sqrt(2.0 * dis * limits.dec_w)
    )
    if not adm.any():
        return PlanResult(STOP, -math.inf, True, 0, window, 0.0)

    best_idx = -1
    best_key = None
    best_g = -math.inf
    for idx in np.flatnonzero(adm):
        vi, wi = float(v[idx]), float(w[idx])
        ex, ey = _arc_position(pose.x, pose.y, pose.theta, vi, wi, config.horizon)
        end_pose = Pose2D(float(ex), float(ey), pose.theta + wi * config.horizon)
        g = (
            config.alpha * heading_score(end_pose, goal)
            + config.beta * dist_score(float(dis[idx]), config.r_e)
            + config.gamma * vel_score(vi, limits.v_max)
        )
        key = (g, vi, -abs(wi))
        if best_key is None or key > best_key:
            best_key = key
            best_idx = int(idx)
            best_g = g
    return PlanResult(
        best=VelocityCommand(float(v[best_idx]), float(w[best_idx])),
        score=best_g,
        emergency=False,
        n_admissible=int(adm.sum()),
        window=window,
        best_dis=float(dis[best_idx]),
    )
