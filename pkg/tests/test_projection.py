import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusenav.geometry import RigidTransform, Vec3, compose, rotation_about_axis
from fusenav.projection import (
    Frame,
    PlanarPoints,
    PointCloud,
    PseudoScan,
    ScanGrid,
    bin_to_pseudo_scan,
    cloud_to_lidar_frame,
    flatten,
    merge_planar,
)


def homogeneous_apply(t: RigidTransform, p: np.ndarray) -> np.ndarray:
    m = np.eye(4)
    m[:3, :3] = t.rotation
    m[:3, 3] = t.translation
    return (m @ np.append(p, 1.0))[:3]


class TestCloudToLidarFrame:
    def test_identity_extrinsic(self):
        pts = np.array([[1.0, 2.0, 0.3], [0.5, -0.1, 0.0]])
        out = cloud_to_lidar_frame(PointCloud(Frame.CAMERA1, pts), RigidTransform.identity())
        assert out.frame_id == Frame.LIDAR
        np.testing.assert_array_equal(out.points, pts)

    def test_tilt_plus_translation_matches_dense_oracle(self):
        tilt = rotation_about_axis(Vec3(0, 1, 0), math.radians(-15.0))
        extrinsic = RigidTransform(tilt.rotation, np.array([0.1, 0.0, -0.05]))
        cloud = PointCloud(Frame.CAMERA1, np.array([[1.0, 0.0, 0.0]]))
        out = cloud_to_lidar_frame(cloud, extrinsic)
        expected = homogeneous_apply(extrinsic, np.array([1.0, 0.0, 0.0]))
        np.testing.assert_allclose(out.points[0], expected, atol=1e-12, rtol=0)

    def test_pure_translation(self):
        extrinsic = RigidTransform.from_translation(0.0, 0.0, 0.2)
        cloud = PointCloud(Frame.CAMERA2, np.array([[1.0, 2.0, 0.3]]))
        out = cloud_to_lidar_frame(cloud, extrinsic)
        np.testing.assert_allclose(out.points[0], [1.0, 2.0, 0.5])


class TestFlatten:
    def test_keeps_point_inside_band(self):
        cloud = PointCloud(Frame.LIDAR, np.array([[1.0, 1.0, 0.0]]))
        out = flatten(cloud, (-0.1, 1.5))
        np.testing.assert_array_equal(out.points, [[1.0, 1.0]])

    def test_discards_floor_point_below_band(self):
        cloud = PointCloud(Frame.LIDAR, np.array([[2.0, 0.0, -0.3]]))
        assert flatten(cloud, (-0.1, 1.5)).points.shape[0] == 0

    def test_chair_cloud_covers_full_seat_rectangle(self):
        # Synthetic chair: four legs plus a seat slab. The flattened footprint
        # must cover the whole seat rectangle, not just the leg positions.
        rng = np.random.default_rng(8)
        seat_x, seat_y = (1.0, 1.45), (-0.225, 0.225)
        legs = []
        for lx in (1.05, 1.40):
            for ly in (-0.18, 0.18):
                z = rng.uniform(0.0, 0.40, size=30)
                legs.append(np.column_stack([np.full(30, lx), np.full(30, ly), z]))
        n = 4000
        seat = np.column_stack(
            [
                rng.uniform(*seat_x, size=n),
                rng.uniform(*seat_y, size=n),
                rng.uniform(0.42, 0.48, size=n),
            ]
        )
        cloud = PointCloud(Frame.LIDAR, np.vstack(legs + [seat]))
        flat = flatten(cloud, (-0.05, 1.60))
        res = 0.05
        cells = {
            (int(math.floor(x / res)), int(math.floor(y / res)))
            for x, y in flat.points
        }
        for cx in np.arange(seat_x[0] + res / 2, seat_x[1], res):
            for cy in np.arange(seat_y[0] + res / 2, seat_y[1], res):
                assert (int(math.floor(cx / res)), int(math.floor(cy / res))) in cells

    def test_rejects_camera_frame_cloud(self):
        with pytest.raises(ValueError, match="LiDAR-frame"):
            flatten(PointCloud(Frame.CAMERA1, np.zeros((1, 3))))

    def test_idempotent_when_band_contains_zero(self):
        rng = np.random.default_rng(9)
        pts = rng.uniform(-2, 2, size=(100, 3))
        band = (-0.05, 1.6)
        once = flatten(PointCloud(Frame.LIDAR, pts), band)
        re_embedded = np.column_stack([once.points, np.zeros(len(once.points))])
        twice = flatten(PointCloud(Frame.LIDAR, re_embedded), band)
        np.testing.assert_array_equal(twice.points, once.points)

    def test_planar_norm_never_exceeds_3d_norm(self):
        rng = np.random.default_rng(10)
        pts = rng.uniform(-3, 3, size=(200, 3))
        flat = flatten(PointCloud(Frame.LIDAR, pts), (-5.0, 5.0))
        assert flat.points.shape[0] == 200
        assert np.all(
            np.hypot(flat.points[:, 0], flat.points[:, 1])
            <= np.linalg.norm(pts, axis=1) + 1e-15
        )


GRID = ScanGrid(
    angle_min=math.radians(-120),
    angle_max=math.radians(120),
    angular_resolution=math.radians(1.0),
    max_range=5.0,
)


class TestBinToPseudoScan:
    def test_empty_input_all_bins_inf(self):
        scan = bin_to_pseudo_scan(PlanarPoints(np.empty((0, 2))), GRID)
        assert scan.ranges.shape == (241,)
        assert np.all(np.isinf(scan.ranges))

    def test_single_point_single_bin(self):
        scan = bin_to_pseudo_scan(PlanarPoints(np.array([[1.0, 0.0]])), GRID)
        finite = np.flatnonzero(np.isfinite(scan.ranges))
        assert len(finite) == 1
        # Bearing 0 sits on a bin edge; the floor formula decides the side.
        k = int(finite[0])
        assert k == math.floor((0.0 - GRID.angle_min) / GRID.angular_resolution)
        assert abs(GRID.angle_min + k * GRID.angular_resolution) < GRID.angular_resolution
        assert scan.ranges[k] == pytest.approx(1.0)

    def test_collinear_points_keep_minimum(self):
        scan = bin_to_pseudo_scan(PlanarPoints(np.array([[1.0, 0.0], [2.0, 0.0]])), GRID)
        finite = np.flatnonzero(np.isfinite(scan.ranges))
        assert len(finite) == 1
        assert scan.ranges[finite[0]] == pytest.approx(1.0)

    def test_out_of_range_and_out_of_angle_discarded(self):
        pts = np.array(
            [
                [6.0, 0.0],   # beyond max_range
                [-1.0, -1e-3],  # bearing ~ -179.9 deg, outside 240 deg span
                [0.0, 0.0],   # zero range
            ]
        )
        scan = bin_to_pseudo_scan(PlanarPoints(pts), GRID)
        assert np.all(np.isinf(scan.ranges))

    @given(st.integers(min_value=0, max_value=300))
    @settings(max_examples=30, deadline=None)
    def test_finite_bin_count_never_exceeds_point_count(self, n):
        rng = np.random.default_rng(n)
        pts = rng.uniform(-4, 4, size=(n, 2))
        scan = bin_to_pseudo_scan(PlanarPoints(pts), GRID)
        assert int(np.isfinite(scan.ranges).sum()) <= n

    def test_bin_count_invariant(self):
        g = ScanGrid(-1.0, 1.05, 0.5, 2.0)
        assert g.n_bins == math.floor(2.05 / 0.5) + 1
        scan = bin_to_pseudo_scan(PlanarPoints(np.empty((0, 2))), g)
        assert scan.ranges.shape == (g.n_bins,)

    def test_rejects_bad_ranges_vector(self):
        with pytest.raises(ValueError):
            PseudoScan(GRID, np.zeros(7))
        bad = np.full(GRID.n_bins, np.inf)
        bad[0] = 9.0  # above max_range
        with pytest.raises(ValueError):
            PseudoScan(GRID, bad)


def test_merge_planar_is_concatenation():
    a = PlanarPoints(np.array([[1.0, 0.0]]))
    b = PlanarPoints(np.empty((0, 2)))
    c = PlanarPoints(np.array([[0.0, 2.0], [3.0, 3.0]]))
    merged = merge_planar(a, b, c)
    assert merged.points.shape == (3, 2)
    scan_ab = bin_to_pseudo_scan(merged, GRID)
    scan_ba = bin_to_pseudo_scan(merge_planar(c, b, a), GRID)
    np.testing.assert_array_equal(scan_ab.ranges, scan_ba.ranges)
