"""学習曲線、評価結果、推論結果の可視化"""

from .matplotlib_charts import MatplotlibCharts
from .overlay import CLASS_COLORS, INSTANCE_COLORS, OverlayRenderer, render_overlay
from .plotly_charts import PlotlyCharts
from .seaborn_charts import SeabornCharts

__all__ = [
    "CLASS_COLORS",
    "INSTANCE_COLORS",
    "MatplotlibCharts",
    "OverlayRenderer",
    "PlotlyCharts",
    "SeabornCharts",
    "render_overlay",
]
