"""多言語対応モジュール - レポートとグラフのラベルを日本語と英語で切り替え"""

from typing import Dict, Literal

# 言語タイプの定義
Language = Literal["ja", "en"]
LANGUAGES: tuple[Language, ...] = ("ja", "en")


class I18n:
    """多言語対応クラス"""

    # 翻訳辞書
    _translations: Dict[str, Dict[Language, str]] = {
        # レポート見出し
        "report_title": {"ja": "レーン検出 評価レポート", "en": "Lane Detection Evaluation Report"},
        "report_config": {"ja": "評価設定", "en": "Evaluation settings"},
        "report_summary": {"ja": "集計", "en": "Summary"},
        "report_classification": {"ja": "境界クラス分類", "en": "Boundary classification"},
        # 指標
        "accuracy": {"ja": "精度", "en": "Accuracy"},
        "fp_rate": {"ja": "誤検出率 (FP)", "en": "False positive rate (FP)"},
        "fn_rate": {"ja": "未検出率 (FN)", "en": "False negative rate (FN)"},
        "classification_accuracy": {"ja": "分類精度", "en": "Classification accuracy"},
        # 集計値
        "images": {"ja": "画像数", "en": "Images"},
        "pred_lanes": {"ja": "予測レーン数", "en": "Predicted lanes"},
        "gt_lanes": {"ja": "正解レーン数", "en": "Ground-truth lanes"},
        "matched_points": {"ja": "一致点数", "en": "Matched points"},
        "gt_points": {"ja": "正解点数", "en": "Ground-truth points"},
        # 設定の表示
        "threshold_px": {"ja": "距離閾値 (px)", "en": "Distance threshold (px)"},
        "min_points": {"ja": "最小点数", "en": "Minimum points"},
        "fp_cutoff": {"ja": "一致率の閾値", "en": "Matched-fraction cutoff"},
        "resolution": {"ja": "評価解像度", "en": "Evaluation resolution"},
        "strategy": {"ja": "対応付け方式", "en": "Matching strategy"},
        # グラフタイトル
        "training_curve_title": {"ja": "学習曲線", "en": "Training Curve"},
        "train_loss": {"ja": "学習損失", "en": "Training loss"},
        "val_metric": {"ja": "検証指標", "en": "Validation metric"},
        "epoch": {"ja": "エポック", "en": "Epoch"},
        "phase_binary": {"ja": "二値フェーズ", "en": "Binary phase"},
        "phase_instance": {"ja": "インスタンスフェーズ", "en": "Instance phase"},
        "ablation_title": {
            "ja": "ディスクリプタサイズ別の分類精度",
            "en": "Classification Accuracy by Descriptor Size",
        },
        "descriptor_size": {"ja": "ディスクリプタサイズ", "en": "Descriptor size"},
        "scheme": {"ja": "クラス体系", "en": "Scheme"},
        "per_image_title": {"ja": "画像ごとの精度", "en": "Per-image Accuracy"},
        "confusion_title": {"ja": "混同行列", "en": "Confusion Matrix"},
        "predicted": {"ja": "予測", "en": "Predicted"},
        "actual": {"ja": "正解", "en": "Actual"},
        "not_available": {"ja": "該当なし", "en": "n/a"},
    }

    def __init__(self, language: Language = "ja"):
        """
        初期化

        Args:
            language: 表示言語 ('ja' または 'en')
        """
        self._current_language: Language = language

    def get(self, key: str, **kwargs: object) -> str:
        """
        翻訳されたテキストを取得

        Args:
            key: 翻訳キー
            **kwargs: フォーマット用のキーワード引数

        Returns:
            翻訳されたテキスト (未登録のキーはキーそのもの)
        """
        translation: Dict[Language, str] = self._translations.get(key, {})
        text: str = translation.get(self._current_language, key)

        if kwargs:
            try:
                return text.format(**kwargs)
            except KeyError:
                return text

        return text

    def set_language(self, language: Language) -> None:
        if language not in LANGUAGES:
            raise ValueError(f"Unsupported language: {language}")
        self._current_language = language

    def get_language(self) -> Language:
        return self._current_language


# グローバルインスタンス
_i18n_instance: I18n = I18n()


def get_i18n() -> I18n:
    """
    I18nのグローバルインスタンスを取得

    Returns:
        I18nインスタンス
    """
    return _i18n_instance
