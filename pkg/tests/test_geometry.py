import numpy as np
import pytest

from lane_cascade_toolkit.errors import InstanceBudgetError, RasterizationError
from lane_cascade_toolkit.geometry import (
    MISSING_X,
    BoundaryRasterizer,
    InstanceMap,
    LaneGeometry,
    Polyline,
    rasterize_boundaries,
)


def _segment_distance(vertices: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """線分ごとに射影して最小距離を取る素朴な実装"""
    best = np.full(xs.shape, np.inf)
    pairs = [(vertices[0], vertices[0])] if len(vertices) == 1 else zip(vertices, vertices[1:])
    for a, b in pairs:
        d = b - a
        denom = float(d @ d)
        if denom == 0:
            t = np.zeros_like(xs, dtype=np.float64)
        else:
            t = np.clip(((xs - a[0]) * d[0] + (ys - a[1]) * d[1]) / denom, 0.0, 1.0)
        best = np.minimum(best, np.hypot(xs - (a[0] + t * d[0]), ys - (a[1] + t * d[1])))
    return best


class TestPolyline:
    def test_nan_becomes_missing(self):
        line = Polyline([0, 2, 4], [1.0, np.nan, 3.0])
        assert line.cols[1] == MISSING_X
        assert line.num_points == 2

    def test_rows_must_increase(self):
        with pytest.raises(ValueError):
            Polyline([3, 1], [0.0, 0.0])

    def test_from_points_sorts_rows(self):
        line = Polyline.from_points([5, 1, 3], [50.0, 10.0, 30.0])
        assert line.rows.tolist() == [1, 3, 5]
        assert line.cols.tolist() == [10.0, 30.0, 50.0]

    def test_flipped_keeps_missing(self):
        line = Polyline([0, 1], [2.0, MISSING_X])
        flipped = line.flipped(10)
        assert flipped.cols.tolist() == [7.0, MISSING_X]

    def test_empty(self):
        assert Polyline.empty().is_empty


class TestRowAverage:
    def test_averages_each_row(self):
        line = LaneGeometry.row_average([(10, 3), (12, 3), (5, 7)])
        assert line.rows.tolist() == [3, 7]
        assert line.cols.tolist() == [11.0, 5.0]

    def test_permutation_invariant(self, rng):
        pixels = np.stack([rng.integers(0, 100, 300), rng.integers(0, 40, 300)], axis=1)
        shuffled = pixels[rng.permutation(len(pixels))]
        assert LaneGeometry.row_average(pixels) == LaneGeometry.row_average(shuffled)

    def test_empty_input(self):
        assert LaneGeometry.row_average([]).is_empty


class TestPointMatch:
    def test_threshold_is_strict(self):
        gt = Polyline([0, 1, 2], [10.0, 10.0, 10.0])
        pred = Polyline([0, 1, 2], [30.0, 29.9, 10.0])
        assert LaneGeometry.point_match_count(pred, gt, 20.0) == (2, 3)

    def test_only_shared_rows_count(self):
        gt = Polyline([0, 1, 2, 3], [5.0, 5.0, MISSING_X, 5.0])
        pred = Polyline([1, 2, 3], [5.0, 5.0, MISSING_X])
        assert LaneGeometry.point_match_count(pred, gt, 1.0) == (1, 3)

    def test_non_positive_threshold(self):
        line = Polyline([0], [0.0])
        with pytest.raises(ValueError):
            LaneGeometry.point_match_count(line, line, 0.0)

    def test_average_distance_without_overlap(self):
        assert LaneGeometry.average_distance(Polyline([0], [1.0]), Polyline([5], [1.0])) is None


class TestResampling:
    def test_interpolates_without_extrapolation(self):
        line = Polyline([10, 20], [0.0, 10.0])
        resampled = LaneGeometry.resample_rows(line, [5, 10, 15, 20, 25])
        assert resampled.cols.tolist() == [MISSING_X, 0.0, 5.0, 10.0, MISSING_X]

    def test_align_to_gt_network_frame(self):
        pred = Polyline([0, 50, 100], [10.0, 20.0, 30.0])
        gt = Polyline([0, 400], [40.0, 120.0])
        aligned_pred, aligned_gt = LaneGeometry.align_to_gt(
            pred, (128, 100), gt, (512, 400), "network"
        )
        assert aligned_pred.rows.tolist() == [0, 400]
        assert aligned_pred.cols.tolist() == pytest.approx([10.0, 30.0])
        assert aligned_gt.cols.tolist() == pytest.approx([10.0, 30.0])

    def test_align_to_gt_source_frame(self):
        pred = Polyline([0, 100], [10.0, 30.0])
        gt = Polyline([0, 400], [40.0, 120.0])
        aligned_pred, aligned_gt = LaneGeometry.align_to_gt(
            pred, (128, 100), gt, (512, 400), "source"
        )
        assert aligned_pred.cols.tolist() == pytest.approx([40.0, 120.0])
        assert aligned_gt.cols.tolist() == [40.0, 120.0]


class TestRasterize:
    def test_stroke_width_oracle(self, rng):
        size = (512, 256)
        ys, xs = np.mgrid[0 : size[1], 0 : size[0]]
        for _ in range(100):
            n = int(rng.integers(1, 12))
            rows = np.sort(rng.choice(np.arange(0, size[1]), size=n, replace=False))
            cols = rng.uniform(-20.0, size[0] + 20.0, n)
            line = Polyline(rows, cols)

            labeled = rasterize_boundaries([line], width_px=5, size=size).data == 1
            verts = BoundaryRasterizer.vertices(line, size)
            dist = _segment_distance(verts, xs.astype(np.float64), ys.astype(np.float64))

            assert np.all(dist[labeled] <= 2.5 + 1e-6)
            assert np.all(labeled[dist < 2.5 - 1e-6])

    def test_lower_index_wins_overlap(self):
        a = Polyline([0, 20], [10.0, 10.0])
        b = Polyline([0, 20], [11.0, 11.0])
        data = rasterize_boundaries([a, b], width_px=3, size=(32, 24)).data
        assert data[10, 10] == 1
        assert data[10, 12] == 2

    def test_empty_boundary_keeps_its_id_unused(self):
        line = Polyline([0, 10], [5.0, 5.0])
        instance_map = rasterize_boundaries([Polyline.empty(), line], size=(16, 16))
        assert instance_map.instance_ids() == [2]

    def test_source_size_scaling(self):
        line = Polyline([0, 200], [400.0, 400.0])
        data = rasterize_boundaries([line], width_px=1, size=(128, 64), source_size=(512, 256))
        assert data.data[25, 100] == 1

    def test_too_many_boundaries(self):
        lines = [Polyline([0], [float(i)]) for i in range(5)]
        with pytest.raises(InstanceBudgetError):
            rasterize_boundaries(lines)

    def test_instance_map_rejects_negative_label(self):
        with pytest.raises(ValueError, match="negative label -2"):
            InstanceMap(np.array([[0, 3], [-2, 1]]))

    def test_instance_map_rejects_label_over_budget(self):
        with pytest.raises(InstanceBudgetError, match="5 boundaries"):
            InstanceMap(np.array([[0, 5]]))

    @pytest.mark.parametrize("width_px", [0, 4])
    def test_invalid_width(self, width_px):
        with pytest.raises(RasterizationError):
            rasterize_boundaries([], width_px=width_px)
