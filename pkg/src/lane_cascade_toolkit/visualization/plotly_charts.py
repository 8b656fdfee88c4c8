"""Plotlyベースのインタラクティブチャート生成モジュール"""

from pathlib import Path
from typing import Any, List, Optional

import plotly.graph_objects as go
import polars as pl
from plotly.subplots import make_subplots

from lane_cascade_toolkit.i18n import I18n, get_i18n


class PlotlyCharts:
    """Plotlyインタラクティブチャート生成クラス"""

    @staticmethod
    def create_loss_chart(history: pl.DataFrame, i18n: Optional[I18n] = None) -> go.Figure:
        """
        学習損失と検証指標の折れ線グラフを作成

        Args:
            history: epoch, phase, lr, train_loss, val_metric, val_value を持つデータフレーム
            i18n: ラベルの翻訳

        Returns:
            Plotly Figureオブジェクト
        """
        t: I18n = i18n or get_i18n()
        fig: go.Figure = make_subplots(rows=2, cols=1, shared_xaxes=True, vertical_spacing=0.08)

        colors: dict[str, str] = {"binary": "royalblue", "instance": "darkorange"}
        for phase, color in colors.items():
            part: pl.DataFrame = history.filter(pl.col("phase") == phase)
            if part.height == 0:
                continue
            epochs: List[int] = [e + 1 for e in part["epoch"].to_list()]
            name: str = t.get(f"phase_{phase}")

            fig.add_trace(
                go.Scatter(
                    x=epochs,
                    y=part["train_loss"].to_list(),
                    mode="lines+markers",
                    name=name,
                    line=dict(color=color, width=2),
                    marker=dict(size=5, color=color),
                    customdata=part["lr"].to_list(),
                    hovertemplate="<b>%{x}</b><br>loss: %{y:.4f}<br>lr: %{customdata:.2e}"
                    "<extra></extra>",
                ),
                row=1,
                col=1,
            )
            fig.add_trace(
                go.Scatter(
                    x=epochs,
                    y=part["val_value"].to_list(),
                    mode="lines+markers",
                    name=f"{name} ({part['val_metric'][0]})",
                    line=dict(color=color, width=2, dash="dot"),
                    marker=dict(size=5, color=color),
                    hovertemplate="<b>%{x}</b><br>%{y:.4f}<extra></extra>",
                ),
                row=2,
                col=1,
            )

        fig.update_yaxes(title=t.get("train_loss"), row=1, col=1)
        fig.update_yaxes(title=t.get("val_metric"), row=2, col=1)
        fig.update_xaxes(title=t.get("epoch"), row=2, col=1)
        fig.update_layout(
            title=t.get("training_curve_title"), hovermode="x unified", template="plotly_white",
        )

        return fig

    @staticmethod
    def create_per_image_chart(
        per_image: pl.DataFrame, i18n: Optional[I18n] = None
    ) -> go.Figure:
        """
        画像ごとの精度の棒グラフを作成 (正解点のない画像は除く)

        Args:
            per_image: source_id, accuracy, matched_points, gt_points を持つデータフレーム
            i18n: ラベルの翻訳

        Returns:
            Plotly Figureオブジェクト
        """
        t: I18n = i18n or get_i18n()
        df: pl.DataFrame = per_image.filter(pl.col("accuracy").is_not_null())

        custom_data: List[List[Any]] = [
            [m, g] for m, g in zip(df["matched_points"].to_list(), df["gt_points"].to_list())
        ]
        fig: go.Figure = go.Figure(
            go.Bar(
                x=df["source_id"].to_list(),
                y=df["accuracy"].to_list(),
                marker=dict(color=df["accuracy"].to_list(), colorscale="Viridis", cmin=0, cmax=1),
                customdata=custom_data,
                hovertemplate="<b>%{x}</b><br>"
                + t.get("accuracy")
                + ": %{y:.3f}<br>%{customdata[0]} / %{customdata[1]}<extra></extra>",
            )
        )

        fig.update_layout(
            title=t.get("per_image_title"),
            yaxis=dict(title=t.get("accuracy"), range=[0, 1]),
            template="plotly_white",
            showlegend=False,
        )

        return fig

    @staticmethod
    def save(fig: go.Figure, path: str | Path) -> Path:
        """HTMLとして保存 (plotly.js はCDNから読み込む)"""
        file_path: Path = Path(path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        fig.write_html(file_path, include_plotlyjs="cdn")
        return file_path
