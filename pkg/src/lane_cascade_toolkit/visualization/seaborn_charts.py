"""Seaborn-based statistical charts."""

from typing import Optional

import matplotlib.pyplot as plt
import matplotlib_fontja  # noqa
import numpy as np
import polars as pl
import seaborn as sns
from matplotlib.figure import Figure

from lane_cascade_toolkit.i18n import I18n, get_i18n


class SeabornCharts:
    """Generator for Seaborn statistical charts."""

    @staticmethod
    def _frame_heatmap(
        frame: pl.DataFrame,
        row_key: str,
        title: str,
        axis_labels: tuple[str, str],
        figsize=(8, 6),
        cmap: str = "YlOrRd",
        fmt: str = "d",
        cbar_label: Optional[str] = None,
    ) -> Figure:
        """
        Draw a wide frame as a heatmap: row_key gives the rows, every other column one cell.

        Null cells stay blank.
        """
        columns: list[str] = [c for c in frame.columns if c != row_key]
        values: np.ndarray = frame.select(columns).to_numpy()
        if fmt != "d":
            values = values.astype(np.float64)

        fig, ax = plt.subplots(figsize=figsize)
        sns.heatmap(
            values,
            xticklabels=columns,
            yticklabels=[str(v) for v in frame[row_key].to_list()],
            annot=True,
            fmt=fmt,
            cmap=cmap,
            cbar_kws={"label": cbar_label} if cbar_label else None,
            ax=ax,
        )
        ax.set_title(title, fontsize=14, fontweight="bold")
        ax.set_xlabel(axis_labels[0], fontsize=12)
        ax.set_ylabel(axis_labels[1], fontsize=12)
        plt.tight_layout()
        return fig

    @staticmethod
    def create_ablation_heatmap(
        pivot: pl.DataFrame, i18n: Optional[I18n] = None, figsize=(6, 6)
    ) -> Figure:
        """
        Accuracy per descriptor size (rows) and scheme (columns).

        Args:
            pivot: DataFrame with a "size" column and one accuracy column per scheme
            i18n: Label translations
            figsize: Figure size

        Returns:
            Matplotlib Figure object
        """
        t: I18n = i18n or get_i18n()
        return SeabornCharts._frame_heatmap(
            pivot,
            "size",
            t.get("ablation_title"),
            (t.get("scheme"), t.get("descriptor_size")),
            figsize=figsize,
            cmap="Blues",
            fmt=".4f",
            cbar_label=t.get("classification_accuracy"),
        )

    @staticmethod
    def create_confusion_heatmap(
        confusion: pl.DataFrame, i18n: Optional[I18n] = None, figsize=(7, 6)
    ) -> Figure:
        """Confusion matrix with actual classes as rows."""
        t: I18n = i18n or get_i18n()
        return SeabornCharts._frame_heatmap(
            confusion,
            "actual",
            t.get("confusion_title"),
            (t.get("predicted"), t.get("actual")),
            figsize=figsize,
        )
