"""Matplotlib-based static charts."""

from pathlib import Path
from typing import Optional

import matplotlib.pyplot as plt
import matplotlib_fontja  # noqa
import polars as pl
from matplotlib.figure import Figure

from lane_cascade_toolkit.i18n import I18n, get_i18n


class MatplotlibCharts:
    """Generator for Matplotlib static charts."""

    @staticmethod
    def create_training_curve(
        history: pl.DataFrame,
        i18n: Optional[I18n] = None,
        figsize=(10, 6),
    ) -> Figure:
        """
        Create a training curve: loss per phase on top, validation metric below.

        Args:
            history: DataFrame with epoch, phase, train_loss, val_metric, val_value
            i18n: Label translations
            figsize: Figure size

        Returns:
            Matplotlib Figure object
        """
        t: I18n = i18n or get_i18n()
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=figsize, sharex=True)

        phase_colors: dict[str, str] = {"binary": "steelblue", "instance": "darkorange"}
        for phase, color in phase_colors.items():
            part: pl.DataFrame = history.filter(pl.col("phase") == phase)
            if part.height == 0:
                continue
            epochs = [e + 1 for e in part["epoch"].to_list()]
            ax1.plot(
                epochs,
                part["train_loss"].to_list(),
                marker="o",
                linewidth=2,
                markersize=3,
                color=color,
                label=t.get(f"phase_{phase}"),
            )
            ax2.plot(
                epochs,
                part["val_value"].to_list(),
                marker="o",
                linewidth=2,
                markersize=3,
                color=color,
                label=part["val_metric"][0],
            )

        switch: pl.DataFrame = history.filter(pl.col("phase") == "instance")
        if switch.height and switch.height < history.height:
            for ax in (ax1, ax2):
                ax.axvline(switch["epoch"].min() + 0.5, color="gray", linestyle="--", alpha=0.6)

        ax1.set_title(t.get("training_curve_title"), fontsize=14, fontweight="bold")
        ax1.set_ylabel(t.get("train_loss"), fontsize=12)
        ax1.grid(True, alpha=0.3)
        ax1.legend()

        ax2.set_xlabel(t.get("epoch"), fontsize=12)
        ax2.set_ylabel(t.get("val_metric"), fontsize=12)
        ax2.grid(True, alpha=0.3)
        ax2.legend()

        plt.tight_layout()

        return fig

    @staticmethod
    def save(fig: Figure, path: str | Path, dpi: int = 120) -> Path:
        """Save a figure as PNG and release it."""
        file_path: Path = Path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(file_path, dpi=dpi)
        plt.close(fig)
        return file_path
