"""Map and trajectory plotting (vector output)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runner import ScenarioResult


def plot_result(result: ScenarioResult, path) -> None:
    """Static walls, both cost layers, and ground-truth vs estimated paths."""
    spec = result.map.spec
    extent = (
        spec.origin_x,
        spec.origin_x + spec.width * spec.resolution,
        spec.origin_y,
        spec.origin_y + spec.height * spec.resolution,
    )
    fig, ax = plt.subplots(figsize=(9, max(3.0, 9 * spec.height / spec.width)))

    static = np.ma.masked_where(result.map.static.cells == 0, result.map.static.cells)
    lidar = np.ma.masked_where(result.map.lidar.cells < 16, result.map.lidar.cells)
    camera = np.ma.masked_where(result.map.camera.cells < 16, result.map.camera.cells)
    ax.imshow(lidar, cmap="Greens", origin="lower", extent=extent, vmin=0, vmax=255, alpha=0.8)
    ax.imshow(camera, cmap="Reds", origin="lower", extent=extent, vmin=0, vmax=255, alpha=0.6)
    ax.imshow(static, cmap="gray_r", origin="lower", extent=extent, vmin=0, vmax=1)

    gt = np.array([(r.ground_truth.x, r.ground_truth.y) for r in result.records])
    est = np.array([(r.estimated.x, r.estimated.y) for r in result.records])
    if gt.size:
        ax.plot(gt[:, 0], gt[:, 1], "b-", linewidth=1.5, label="ground truth")
        ax.plot(est[:, 0], est[:, 1], "c--", linewidth=0.8, label="estimated")
        ax.plot(gt[0, 0], gt[0, 1], "ks", markersize=6, label="start")
    ax.plot(result.final_pose.x, result.final_pose.y, "b^", markersize=7)

    state = "goal" if result.goal_reached else ("collision" if result.collided else "timeout")
    ax.set_title(f"{result.scenario_name} [{result.mode.value}] - {state}")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
