"""Closed-loop scenario execution: sense, fuse, plan, act.

A scenario bundles the world, robot, sensor models, planner config, and run
settings. Each tick renders the sensors at the true pose, registers them
into the cost layers at the estimated (noisy) pose, plans on the fused and
inflated map, and steps the world. Runs terminate on goal, collision, or
timeout and are bit-for-bit reproducible for a fixed seed.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import yaml

from .calibration import estimate_extrinsic, synth_marker_observations
from .costmap import MultiLayerMap, inflate, mark_from_scan, world_to_cell
from .geometry import Pose2D, compose
from .planner import DwaConfig, RobotLimits, VelocityCommand, select_velocity
from .projection import (
    DEFAULT_Z_BAND,
    Frame,
    ScanGrid,
    bin_to_pseudo_scan,
    cloud_to_lidar_frame,
    flatten,
    merge_planar,
)
from .sim import (
    Box,
    CameraModel,
    Chair,
    LidarModel,
    Person,
    RobotState,
    World,
    camera_from_camera,
    clearance,
    lidar_from_camera,
    localize,
    raycast_lidar,
    render_depth_cloud,
    step_world,
)

# Per-tick random stream ids, combined with (seed, tick) into a SeedSequence.
_S_LOC, _S_LIDAR, _S_CAM1, _S_CAM2, _S_CALIB = range(5)


class FusionMode(Enum):
    LIDAR_ONLY = "lidar"
    FUSION = "fusion"


@dataclass(frozen=True)
class LocalizationSetup:
    sigma_xy: float = 0.03
    sigma_theta: float = 0.01


@dataclass(frozen=True)
class CalibrationSetup:
    """Synthetic marker-chain calibration run once before the loop."""

    observations: int = 50
    rot_sigma: float = math.radians(0.5)
    trans_sigma: float = 0.005


@dataclass
class Scenario:
    name: str
    world: World
    start: Pose2D
    goal: tuple[float, float]
    lidar: LidarModel = field(default_factory=LidarModel)
    cameras: tuple[CameraModel, CameraModel] = None
    limits: RobotLimits = field(default_factory=RobotLimits)
    dwa: DwaConfig = field(default_factory=DwaConfig)
    localization: LocalizationSetup = field(default_factory=LocalizationSetup)
    calibration: CalibrationSetup | None = field(default_factory=CalibrationSetup)
    mode: FusionMode = FusionMode.FUSION
    seed: int = 7
    max_duration: float = 60.0
    resolution: float = 0.05
    goal_tolerance: float = 0.2
    robot_radius: float = 0.2
    z_band: tuple[float, float] = DEFAULT_Z_BAND
    camera_scan_resolution: float = math.radians(0.5)

    def __post_init__(self) -> None:
        if self.cameras is None:
            self.cameras = default_camera_pair()


def default_camera_pair(
    noise_sigma: float = 0.01,
    baseline: float = 0.15,
    yaw: float = math.radians(42.0),
    **kwargs,
) -> tuple[CameraModel, CameraModel]:
    left = CameraModel(
        frame=Frame.CAMERA1, mount_y=baseline, yaw=yaw, noise_sigma=noise_sigma, **kwargs
    )
    right = CameraModel(
        frame=Frame.CAMERA2, mount_y=-baseline, yaw=-yaw, noise_sigma=noise_sigma, **kwargs
    )
    return (left, right)


class ScenarioError(ValueError):
    """Raised when a scenario fails validation; carries all violations."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid scenario: " + "; ".join(violations))


def validate_scenario(scenario: Scenario) -> list[str]:
    """Collect constraint violations (empty list means the scenario is runnable)."""
    problems = []
    world = scenario.world
    static = world.static_layer(scenario.resolution)
    for label, (x, y) in (("start", (scenario.start.x, scenario.start.y)), ("goal", scenario.goal)):
        ix, iy = world_to_cell(static.spec, x, y)
        if not static.spec.contains(ix, iy):
            problems.append(f"{label} ({x}, {y}) lies outside the static map")
        elif static.cells[iy, ix] != 0:
            problems.append(f"{label} ({x}, {y}) is not in free space of the static map")
    for i, ob in enumerate(world.obstacles):
        if isinstance(ob, Box):
            inside = 0 <= ob.x_min and ob.x_max <= world.width and 0 <= ob.y_min and ob.y_max <= world.height
        elif isinstance(ob, Chair):
            x0, y0, x1, y1 = ob.seat_bounds
            inside = 0 <= x0 and x1 <= world.width and 0 <= y0 and y1 <= world.height
        else:
            inside = all(0 <= x <= world.width and 0 <= y <= world.height for x, y in ob.waypoints)
        if not inside:
            problems.append(f"obstacle {i} extends outside the world bounds")
    if scenario.max_duration <= 0:
        problems.append("max_duration must be > 0")
    return problems


@dataclass(frozen=True)
class TickRecord:
    t: float
    ground_truth: Pose2D
    estimated: Pose2D
    command: VelocityCommand
    clearance: float


@dataclass
class ScenarioResult:
    scenario_name: str
    mode: FusionMode
    seed: int
    records: list[TickRecord]
    goal_reached: bool
    collided: bool
    timed_out: bool
    metrics: dict
    map: MultiLayerMap
    final_pose: Pose2D

    def __post_init__(self) -> None:
        if sum((self.goal_reached, self.collided, self.timed_out)) != 1:
            raise ValueError("exactly one terminal flag must be set")


def _tick_seed(seed: int, tick: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, tick, stream])


def run_scenario(scenario: Scenario) -> ScenarioResult:
    """Run the closed loop until goal, collision, or timeout."""
    problems = validate_scenario(scenario)
    if problems:
        raise ScenarioError(problems)

    world = copy.deepcopy(scenario.world)  # people carry mutable progress
    static = world.static_layer(scenario.resolution)
    fused_map = MultiLayerMap.from_static(static)
    lidar = scenario.lidar
    cam1, cam2 = scenario.cameras
    dwa = scenario.dwa
    loc = scenario.localization

    ext1 = lidar_from_camera(cam1, lidar)
    if scenario.calibration is not None:
        cal = scenario.calibration
        pairs = synth_marker_observations(
            camera_from_camera(cam1, cam2),
            cal.observations,
            cal.rot_sigma,
            cal.trans_sigma,
            seed=_tick_seed(scenario.seed, 0, _S_CALIB),
        )
        ext2 = compose(ext1, estimate_extrinsic(pairs).transform)
    else:
        ext2 = lidar_from_camera(cam2, lidar)

    cam_grid = ScanGrid(
        -lidar.fov / 2,
        lidar.fov / 2,
        scenario.camera_scan_resolution,
        max(cam1.max_range, cam2.max_range),
    )

    robot = RobotState(pose=scenario.start, radius=scenario.robot_radius)
    records: list[TickRecord] = []
    goal_reached = collided = timed_out = False
    tick = 0
    while True:
        t = tick * dwa.dt
        if t >= scenario.max_duration:
            timed_out = True
            break

        est_pose = localize(
            robot, loc.sigma_xy, loc.sigma_theta, _tick_seed(scenario.seed, tick, _S_LOC)
        )
        scan = raycast_lidar(world, robot, lidar, _tick_seed(scenario.seed, tick, _S_LIDAR))
        mark_from_scan(fused_map.lidar, est_pose, scan)

        if scenario.mode == FusionMode.FUSION:
            parts = []
            for cam, ext, stream in ((cam1, ext1, _S_CAM1), (cam2, ext2, _S_CAM2)):
                cloud = render_depth_cloud(
                    world, robot, cam, seed=_tick_seed(scenario.seed, tick, stream)
                )
                parts.append(flatten(cloud_to_lidar_frame(cloud, ext), scenario.z_band))
            cam_scan = bin_to_pseudo_scan(merge_planar(*parts), cam_grid)
            mark_from_scan(fused_map.camera, est_pose, cam_scan)

        inflated = inflate(fused_map, dwa.r_e)
        plan = select_velocity(est_pose, robot.actual, scenario.goal, inflated, scenario.limits, dwa)
        records.append(
            TickRecord(
                t=t,
                ground_truth=robot.pose,
                estimated=est_pose,
                command=plan.best,
                clearance=clearance(world, robot.pose.x, robot.pose.y),
            )
        )

        robot = step_world(world, robot, plan.best, dwa.dt, scenario.limits)
        tick += 1
        if math.hypot(robot.pose.x - scenario.goal[0], robot.pose.y - scenario.goal[1]) < scenario.goal_tolerance:
            goal_reached = True
            break
        if robot.collided:
            collided = True
            break

    terminal_clearance = clearance(world, robot.pose.x, robot.pose.y)
    metrics = _summarize(records, robot.pose, terminal_clearance, dwa.dt)
    return ScenarioResult(
        scenario_name=scenario.name,
        mode=scenario.mode,
        seed=scenario.seed,
        records=records,
        goal_reached=goal_reached,
        collided=collided,
        timed_out=timed_out,
        metrics=metrics,
        map=fused_map,
        final_pose=robot.pose,
    )


def _summarize(records, final_pose, terminal_clearance, dt):
    poses = [r.ground_truth for r in records] + [final_pose]
    path_length = sum(
        math.hypot(b.x - a.x, b.y - a.y) for a, b in zip(poses, poses[1:])
    )
    err_x = [abs(r.estimated.x - r.ground_truth.x) for r in records]
    err_y = [abs(r.estimated.y - r.ground_truth.y) for r in records]
    err = [math.hypot(ex, ey) for ex, ey in zip(err_x, err_y)]
    clearances = [r.clearance for r in records] + [terminal_clearance]
    return {
        "ticks": len(records),
        "duration_s": len(records) * dt,
        "path_length_m": path_length,
        "mean_position_error_m": float(np.mean(err)) if err else 0.0,
        "max_position_error_m": float(np.max(err)) if err else 0.0,
        "mean_abs_error_x_m": float(np.mean(err_x)) if err_x else 0.0,
        "mean_abs_error_y_m": float(np.mean(err_y)) if err_y else 0.0,
        "min_clearance_m": float(np.min(clearances)),
    }


TRAJECTORY_HEADER = "t,x_gt,y_gt,theta_gt,x_est,y_est,theta_est,v,w,clearance"


def emit_outputs(result: ScenarioResult, out_dir) -> dict[str, Path]:
    """Write trajectory.csv, metrics.json, and map_path.svg into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trajectory": out / "trajectory.csv",
        "metrics": out / "metrics.json",
        "plot": out / "map_path.svg",
    }
    lines = [TRAJECTORY_HEADER]
    for r in records_of(result):
        g, e, c = r.ground_truth, r.estimated, r.command
        lines.append(
            ",".join(
                repr(float(v))
                for v in (r.t, g.x, g.y, g.theta, e.x, e.y, e.theta, c.v, c.w, r.clearance)
            )
        )
    paths["trajectory"].write_text("\n".join(lines) + "\n")

    summary = {
        "scenario": result.scenario_name,
        "mode": result.mode.value,
        "seed": result.seed,
        "goal_reached": result.goal_reached,
        "collided": result.collided,
        "timed_out": result.timed_out,
        **result.metrics,
    }
    paths["metrics"].write_text(json.dumps(summary, indent=2) + "\n")

    from . import viz  # matplotlib import deferred to output time

    viz.plot_result(result, paths["plot"])
    return paths


def records_of(result: ScenarioResult) -> list[TickRecord]:
    return result.records


@dataclass
class CompareReport:
    lidar_only: ScenarioResult
    fusion: ScenarioResult
    deltas: dict
    verdict: str


def compare_modes(scenario: Scenario) -> CompareReport:
    """Run the scenario in both fusion modes with the same seed."""
    lidar_res = run_scenario(replace(scenario, mode=FusionMode.LIDAR_ONLY))
    fusion_res = run_scenario(replace(scenario, mode=FusionMode.FUSION))
    deltas = {
        k: fusion_res.metrics[k] - lidar_res.metrics[k]
        for k in fusion_res.metrics
        if isinstance(fusion_res.metrics[k], (int, float))
    }
    lidar_unsafe = lidar_res.collided or lidar_res.metrics["min_clearance_m"] < scenario.robot_radius
    fusion_ok = fusion_res.goal_reached and not fusion_res.collided
    if fusion_ok and lidar_unsafe:
        verdict = "fusion reached the goal safely; lidar-only violated clearance"
    elif fusion_ok and lidar_res.goal_reached:
        verdict = "both modes reached the goal"
    elif fusion_ok:
        verdict = "fusion reached the goal; lidar-only did not"
    else:
        verdict = "fusion did not reach the goal"
    return CompareReport(lidar_res, fusion_res, deltas, verdict)


# --- scenario files ---------------------------------------------------------
#
# YAML schema (see scenarios/example.yaml for a commented example):
#   world:    size [w, h] | map_file, obstacles (box/chair/person entries)
#   robot:    start [x, y, theta], goal [x, y], radius, limits {...}
#   sensors:  lidar {...}, cameras {...}, localization {...},
#             calibration {...} | null, z_band [lo, hi],
#             camera_scan_resolution_deg
#   planner:  alpha beta gamma dt horizon v_samples w_samples r_e
#   run:      mode, seed, max_duration, goal_tolerance, resolution

def _obstacle_from_dict(d: dict):
    kind = d.get("type")
    if kind == "box":
        x0, y0 = d["min"]
        x1, y1 = d["max"]
        return Box(x0, y0, x1, y1, d["height"])
    if kind == "chair":
        return Chair(
            center_x=d["center"][0],
            center_y=d["center"][1],
            seat_size_x=d["seat_size"][0],
            seat_size_y=d["seat_size"][1],
            seat_lo=d.get("seat_lo", 0.42),
            seat_hi=d.get("seat_hi", 0.48),
            leg_radius=d.get("leg_radius", 0.02),
            leg_height=d.get("leg_height", 0.42),
            leg_span_x=d.get("leg_span", [0.37, 0.37])[0],
            leg_span_y=d.get("leg_span", [0.37, 0.37])[1],
        )
    if kind == "person":
        return Person(
            waypoints=[tuple(p) for p in d["waypoints"]],
            speed=d.get("speed", 0.5),
            radius=d.get("radius", 0.25),
            height=d.get("height", 1.7),
        )
    raise ValueError(f"unknown obstacle type {kind!r}")


def scenario_from_dict(cfg: dict, name: str = "scenario") -> Scenario:
    w = cfg.get("world", {})
    world = World(
        width=w.get("size", [15.0, 10.0])[0],
        height=w.get("size", [15.0, 10.0])[1],
        obstacles=[_obstacle_from_dict(o) for o in w.get("obstacles", [])],
        map_file=w.get("map_file"),
    )
    r = cfg.get("robot", {})
    start = r.get("start", [1.0, 1.0, 0.0])
    s = cfg.get("sensors", {})
    lidar_cfg = s.get("lidar", {})
    lidar = LidarModel(
        fov=math.radians(lidar_cfg.get("fov_deg", 240.0)),
        angular_resolution=math.radians(lidar_cfg.get("resolution_deg", 1.0)),
        max_range=lidar_cfg.get("max_range", 8.0),
        mount_height=lidar_cfg.get("mount_height", 0.2),
        noise_sigma=lidar_cfg.get("noise_sigma", 0.01),
    )
    cam_cfg = s.get("cameras", {})
    cameras = default_camera_pair(
        noise_sigma=cam_cfg.get("noise_sigma", 0.01),
        baseline=cam_cfg.get("baseline", 0.15),
        yaw=math.radians(cam_cfg.get("yaw_deg", 42.0)),
        hfov=math.radians(cam_cfg.get("hfov_deg", 87.0)),
        vfov=math.radians(cam_cfg.get("vfov_deg", 58.0)),
        cols=cam_cfg.get("cols", 160),
        rows=cam_cfg.get("rows", 120),
        tilt=math.radians(cam_cfg.get("tilt_deg", 15.0)),
        mount_z=cam_cfg.get("mount_height", 0.3),
        max_range=cam_cfg.get("max_range", 4.0),
    )
    loc_cfg = s.get("localization", {})
    localization = LocalizationSetup(
        sigma_xy=loc_cfg.get("sigma_xy", 0.03),
        sigma_theta=loc_cfg.get("sigma_theta", 0.01),
    )
    cal_cfg = s.get("calibration", "default")
    if cal_cfg is None:
        calibration = None
    elif cal_cfg == "default":
        calibration = CalibrationSetup()
    else:
        calibration = CalibrationSetup(
            observations=cal_cfg.get("observations", 50),
            rot_sigma=math.radians(cal_cfg.get("rot_noise_deg", 0.5)),
            trans_sigma=cal_cfg.get("trans_noise_m", 0.005),
        )
    p = cfg.get("planner", {})
    dwa = DwaConfig(
        alpha=p.get("alpha", 1.0),
        beta=p.get("beta", 1.0),
        gamma=p.get("gamma", 0.5),
        dt=p.get("dt", 0.1),
        horizon=p.get("horizon", 2.0),
        v_samples=p.get("v_samples", 21),
        w_samples=p.get("w_samples", 41),
        r_e=p.get("r_e", 0.35),
    )
    lim = r.get("limits", {})
    limits = RobotLimits(
        v_min=lim.get("v_min", 0.0),
        v_max=lim.get("v_max", 0.6),
        w_min=lim.get("w_min", -1.5),
        w_max=lim.get("w_max", 1.5),
        acc_v=lim.get("acc_v", 0.5),
        dec_v=lim.get("dec_v", 0.5),
        acc_w=lim.get("acc_w", 2.0),
        dec_w=lim.get("dec_w", 2.0),
    )
    run = cfg.get("run", {})
    return Scenario(
        name=cfg.get("name", name),
        world=world,
        start=Pose2D(start[0], start[1], start[2] if len(start) > 2 else 0.0),
        goal=tuple(r.get("goal", [5.0, 5.0])),
        lidar=lidar,
        cameras=cameras,
        limits=limits,
        dwa=dwa,
        localization=localization,
        calibration=calibration,
        mode=FusionMode(run.get("mode", "fusion")),
        seed=run.get("seed", 7),
        max_duration=run.get("max_duration", 60.0),
        resolution=run.get("resolution", 0.05),
        goal_tolerance=run.get("goal_tolerance", 0.2),
        robot_radius=r.get("radius", 0.2),
        z_band=tuple(s.get("z_band", DEFAULT_Z_BAND)),
        camera_scan_resolution=math.radians(s.get("camera_scan_resolution_deg", 0.5)),
    )


def load_scenario(path) -> Scenario:
    cfg = yaml.safe_load(Path(path).read_text())
    if not isinstance(cfg, dict):
        raise ValueError(f"{path}: scenario file must contain a mapping")
    return scenario_from_dict(cfg, name=Path(path).stem)
