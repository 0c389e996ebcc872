import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusenav.costmap import (
    CLEAR_STEP,
    MARK_STEP,
    CostLayer,
    GridSpec,
    MultiLayerMap,
    StaticLayer,
    FREE,
    OCCUPIED,
    _beam_cells,
    bordered_static_layer,
    cell_to_world,
    fused_occupancy,
    fused_state,
    inflate,
    load_static_map,
    mark_from_scan,
    save_static_map,
    world_to_cell,
)
from fusenav.geometry import Pose2D
from fusenav.projection import PlanarPoints, PseudoScan, ScanGrid, bin_to_pseudo_scan


SPEC = GridSpec(0.05, 0.0, 0.0, 60, 60)


def make_map(static=None):
    layer = static or StaticLayer(SPEC, np.zeros((60, 60), dtype=np.uint8))
    return MultiLayerMap.from_static(layer)


def single_beam_scan(angle: float, rng_val: float, max_range=5.0) -> PseudoScan:
    grid = ScanGrid(angle, angle + 1e-6, 1e-5, max_range)
    return PseudoScan(grid, np.array([rng_val]))


class TestCellMath:
    def test_world_to_cell_floor(self):
        assert world_to_cell(SPEC, 0.07, 0.12) == (1, 2)

    def test_cell_center(self):
        assert cell_to_world(SPEC, 0, 0) == (0.025, 0.025)

    def test_round_trip_exhaustive(self):
        spec = GridSpec(0.05, -1.0, 2.0, 10, 10)
        for ix in range(10):
            for iy in range(10):
                assert world_to_cell(spec, *cell_to_world(spec, ix, iy)) == (ix, iy)

    def test_out_of_bounds_reported_not_clamped(self):
        ix, iy = world_to_cell(SPEC, -0.3, 99.0)
        assert ix < 0 and iy >= SPEC.height
        assert not SPEC.contains(ix, iy)


class TestBeamCells:
    @staticmethod
    def dense_sample_cells(spec, x0, y0, x1, y1):
        """Independent traversal oracle: dense sampling along the segment."""
        length = math.hypot(x1 - x0, y1 - y0)
        steps = max(2, int(length / (spec.resolution / 20)))
        cells = []
        for t in np.linspace(0.0, 1.0, steps):
            c = world_to_cell(spec, x0 + t * (x1 - x0), y0 + t * (y1 - y0))
            if not cells or cells[-1] != c:
                cells.append(c)
        return cells

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=60, deadline=None)
    def test_matches_dense_sampling_oracle(self, seed):
        rng = np.random.default_rng(seed)
        x0, y0 = rng.uniform(0.3, 2.7, size=2)
        x1, y1 = rng.uniform(0.3, 2.7, size=2)
        xs, ys, n = _beam_cells(SPEC, x0, y0, np.array([x1]), np.array([y1]))
        walked = [(int(xs[s, 0]), int(ys[s, 0])) for s in range(int(n[0]) + 1)]
        sampled = self.dense_sample_cells(SPEC, x0, y0, x1, y1)
        # Every cell the segment visibly crosses must be walked, in order.
        it = iter(walked)
        for c in sampled:
            for w in it:
                if w == c:
                    break
            else:
                pytest.fail(f"cell {c} missed by walk {walked}")
        # Walk is 4-connected from start cell to end cell.
        assert walked[0] == world_to_cell(SPEC, x0, y0)
        assert walked[-1] == world_to_cell(SPEC, x1, y1)
        for (ax, ay), (bx, by) in zip(walked, walked[1:]):
            assert abs(ax - bx) + abs(ay - by) == 1


class TestMarkFromScan:
    def test_empty_scan_leaves_layer_unchanged(self):
        layer = CostLayer.empty(SPEC)
        grid = ScanGrid(-1.0, 1.0, 0.1, 5.0)
        scan = PseudoScan(grid, np.full(grid.n_bins, np.inf))
        before = layer.cells.copy()
        mark_from_scan(layer, Pose2D(1.5, 1.5, 0.0), scan)
        np.testing.assert_array_equal(layer.cells, before)

    def test_single_beam_marks_hit_and_leaves_traversed_at_zero(self):
        layer = CostLayer.empty(SPEC)
        pose = Pose2D(0.125, 0.125, 0.0)  # center of cell (2, 2)
        mark_from_scan(layer, pose, single_beam_scan(0.0, 1.0))
        hit = world_to_cell(SPEC, 0.125 + 1.0, 0.125)
        assert layer.cells[hit[1], hit[0]] == 255
        # Manual enumeration oracle: the beam crosses cells (2..21, 2).
        traversed = [(ix, 2) for ix in range(2, 22)]
        assert hit == (22, 2)
        for ix, iy in traversed:
            assert layer.cells[iy, ix] == 0
        assert int((layer.cells > 0).sum()) == 1

    def test_mark_then_clear_drops_below_threshold(self):
        layer = CostLayer.empty(SPEC)
        pose = Pose2D(0.125, 0.125, 0.0)
        mark_from_scan(layer, pose, single_beam_scan(0.0, 1.0))
        hit = world_to_cell(SPEC, 1.125, 0.125)
        assert layer.cells[hit[1], hit[0]] == 255
        n_clears = math.ceil(255 / CLEAR_STEP)
        for _ in range(n_clears):
            mark_from_scan(layer, pose, single_beam_scan(0.0, 2.0))
        assert layer.cells[hit[1], hit[0]] < 128

    def test_max_range_beam_clears_full_length_marks_nothing(self):
        layer = CostLayer.empty(SPEC)
        layer.cells[:] = 200
        pose = Pose2D(0.125, 0.125, 0.0)
        mark_from_scan(layer, pose, single_beam_scan(0.0, 5.0, max_range=5.0))
        # No cell rose; cells along the full 5 m ray (clipped at the grid
        # border) decayed by one step.
        assert layer.cells.max() == 200
        assert layer.cells[2, 10] == 200 - CLEAR_STEP

    def test_out_of_bounds_ray_cells_skipped_silently(self):
        layer = CostLayer.empty(SPEC)
        pose = Pose2D(0.125, 0.125, 0.0)
        mark_from_scan(layer, pose, single_beam_scan(math.pi, 2.0))  # exits the grid
        assert layer.cells.sum() == 0  # hit lands outside; nothing marked

    def test_cells_stay_saturated_in_range(self):
        rng = np.random.default_rng(3)
        layer = CostLayer(SPEC, rng.integers(0, 256, size=(60, 60)).astype(np.uint8))
        pose = Pose2D(1.5, 1.5, 0.3)
        grid = ScanGrid(math.radians(-120), math.radians(120), math.radians(2.0), 4.0)
        pts = rng.uniform(-1.2, 1.2, size=(300, 2)) + np.array([0.0, 0.0])
        scan = bin_to_pseudo_scan(PlanarPoints(pts), grid)
        mark_from_scan(layer, pose, scan)
        assert layer.cells.dtype == np.uint8
        assert layer.cells.min() >= 0 and layer.cells.max() <= 255


class TestFusedState:
    def test_truth_table(self):
        # Free only for (static=0, lidar<128, camera<128).
        for static in (0, 1):
            for lidar in (0, 255):
                for camera in (0, 255):
                    m = make_map()
                    m.static.cells[5, 5] = static
                    m.lidar.cells[5, 5] = lidar
                    m.camera.cells[5, 5] = camera
                    expected = FREE if (static == 0 and lidar < 128 and camera < 128) else OCCUPIED
                    assert fused_state(m, 5, 5) == expected

    def test_threshold_boundary(self):
        m = make_map()
        m.lidar.cells[4, 3] = 127
        m.camera.cells[4, 3] = 128
        assert fused_state(m, 3, 4) == OCCUPIED
        m.camera.cells[4, 3] = 127
        assert fused_state(m, 3, 4) == FREE

    def test_out_of_bounds_raises(self):
        with pytest.raises(IndexError):
            fused_state(make_map(), 60, 0)

    def test_camera_only_obstacle_is_occupied(self):
        # The chair mechanism: camera sees the seat, LiDAR never touches it.
        m = make_map()
        m.camera.cells[10, 10] = 255
        assert m.lidar.cells[10, 10] == 0
        assert fused_state(m, 10, 10) == OCCUPIED

    @given(st.integers(0, 1), st.integers(0, 255), st.integers(0, 255))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_layer_values(self, static, lidar, camera):
        m = make_map()
        m.static.cells[7, 7] = static
        m.lidar.cells[7, 7] = lidar
        m.camera.cells[7, 7] = camera
        if fused_state(m, 7, 7) == OCCUPIED:
            m2 = make_map()
            m2.static.cells[7, 7] = max(static, 1)
            m2.lidar.cells[7, 7] = min(255, lidar + 40)
            m2.camera.cells[7, 7] = min(255, camera + 40)
            assert fused_state(m2, 7, 7) == OCCUPIED


class TestInflate:
    def test_zero_radius_equals_fused_state(self):
        m = make_map()
        m.lidar.cells[8, 9] = 200
        m.static.cells[1, 2] = 1
        grid = inflate(m, 0.0)
        np.testing.assert_array_equal(grid.occupied, fused_occupancy(m))

    def test_single_cell_disk_matches_brute_force(self):
        m = make_map()
        m.camera.cells[30, 30] = 255
        r = 2 * SPEC.resolution
        grid = inflate(m, r)
        cx, cy = cell_to_world(SPEC, 30, 30)
        expected = np.zeros_like(grid.occupied)
        for iy in range(SPEC.height):
            for ix in range(SPEC.width):
                px, py = cell_to_world(SPEC, ix, iy)
                expected[iy, ix] = math.hypot(px - cx, py - cy) <= r + 1e-12
        np.testing.assert_array_equal(grid.occupied, expected)
        assert int(grid.occupied.sum()) == 13  # disk of 13 cells

    def test_all_free_map_has_no_inflation(self):
        grid = inflate(make_map(), 0.5)
        assert not grid.occupied.any()

    def test_out_of_bounds_is_occupied(self):
        grid = inflate(make_map(), 0.1)
        assert grid.occupied_cell(-1, 0)
        assert grid.occupied_world(-5.0, 0.1)
        assert not grid.occupied_world(1.0, 1.0)


class TestStaticMapFile:
    def test_round_trip_bit_exact(self, tmp_path):
        spec = GridSpec(0.05, -0.25, 1.5, 12, 7)
        layer = bordered_static_layer(spec)
        layer.cells[3, 4] = 1
        p1 = tmp_path / "map.txt"
        p2 = tmp_path / "map2.txt"
        save_static_map(layer, p1)
        loaded = load_static_map(p1)
        assert loaded.spec == spec
        np.testing.assert_array_equal(loaded.cells, layer.cells)
        save_static_map(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_and_rows_validated(self, tmp_path):
        p = tmp_path / "bad.txt"
        p.write_text("3 2 0.05 0 0\n##\n###\n")
        with pytest.raises(ValueError, match="row 1"):
            load_static_map(p)
        p.write_text("3 2 0.05 0\n###\n###\n")
        with pytest.raises(ValueError, match="header"):
            load_static_map(p)
        p.write_text("3 2 0.05 0 0\n#x#\n###\n")
        with pytest.raises(ValueError, match="characters"):
            load_static_map(p)

    def test_row_order_is_top_first(self, tmp_path):
        spec = GridSpec(0.1, 0.0, 0.0, 3, 2)
        cells = np.array([[1, 0, 0], [0, 0, 1]], dtype=np.uint8)  # iy=0 bottom
        p = tmp_path / "map.txt"
        save_static_map(StaticLayer(spec, cells), p)
        body = p.read_text().splitlines()[1:]
        assert body == ["..#", "#.."]
