"""
オンラインコミュニティを「場所」、投稿を「訪問」とみなす移動分析モジュール

- ingest / distributions / randomwalk / temporal / randomness: 物理空間の移動研究と同じ指標
- patterns / nmf / preference: ライフスパン段階・NMF・パターン分類
- synth: 推定量の検証用の合成データ生成
"""

__version__ = "0.1.0"

from .export_service import MobilityExportService
from .pipeline import StepResult, emit_reference_overlays, run_step

__all__ = [
    "__version__",
    "MobilityExportService",
    "StepResult",
    "emit_reference_overlays",
    "run_step",
]
