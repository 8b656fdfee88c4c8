"""Lane Cascade Toolkit - カスケードCNNによるレーン境界の検出と分類"""

__version__: str = "0.1.0"

# 1枚の画像で検出するレーン境界の最大数 (自車レーンの両境界 + 左右1本ずつ)
K_MAX: int = 4
