import matplotlib

matplotlib.use("Agg")

import polars as pl  # noqa: E402
import pytest  # noqa: E402

from lane_cascade_toolkit.i18n import I18n  # noqa: E402
from lane_cascade_toolkit.visualization import (  # noqa: E402
    MatplotlibCharts,
    PlotlyCharts,
    SeabornCharts,
)


@pytest.fixture
def history() -> pl.DataFrame:
    return pl.DataFrame(
        {
            "epoch": [0, 1, 2, 3],
            "phase": ["binary", "binary", "instance", "instance"],
            "lr": [5e-4, 4e-4, 3e-4, 2e-4],
            "train_loss": [0.7, 0.4, 1.2, 0.8],
            "val_metric": ["val_bce", "val_bce", "val_accuracy", "val_accuracy"],
            "val_value": [0.6, 0.35, 0.5, 0.7],
        }
    )


class TestTrainingCharts:
    def test_training_curve_png(self, tmp_path, history):
        fig = MatplotlibCharts.create_training_curve(history, I18n("en"))
        assert fig.axes[0].get_title() == "Training Curve"
        path = MatplotlibCharts.save(fig, tmp_path / "curve.png")
        assert path.stat().st_size > 0

    def test_loss_chart_has_a_trace_per_phase(self, tmp_path, history):
        fig = PlotlyCharts.create_loss_chart(history, I18n("en"))
        names = {trace.name for trace in fig.data}
        assert {"Binary phase", "Instance phase"} <= names
        assert PlotlyCharts.save(fig, tmp_path / "curve.html").exists()

    def test_binary_only_history(self, history):
        binary = history.filter(pl.col("phase") == "binary")
        fig = MatplotlibCharts.create_training_curve(binary)
        assert len(fig.axes[0].lines) == 1


class TestEvaluationCharts:
    def test_per_image_skips_images_without_ground_truth(self):
        per_image = pl.DataFrame(
            {
                "source_id": ["a", "b"],
                "matched_points": [5, 0],
                "gt_points": [10, 0],
                "accuracy": [0.5, None],
            }
        )
        fig = PlotlyCharts.create_per_image_chart(per_image, I18n("en"))
        assert list(fig.data[0].x) == ["a"]

    def test_ablation_heatmap_with_failed_cell(self):
        pivot = pl.DataFrame(
            {"size": [16, 32], "two_class": [0.9, None], "three_class": [0.8, 0.85]}
        )
        fig = SeabornCharts.create_ablation_heatmap(pivot, I18n("en"))
        assert fig.axes[0].get_ylabel() == "Descriptor size"

    def test_confusion_heatmap(self):
        confusion = pl.DataFrame(
            {"actual": ["continuous", "dashed"], "continuous": [4, 1], "dashed": [0, 5]}
        )
        fig = SeabornCharts.create_confusion_heatmap(confusion, I18n("ja"))
        assert fig.axes[0].get_xlabel() == "予測"
