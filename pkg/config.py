"""実行設定。

優先順位: フィールド既定値 ← 環境変数（.env） ← --config の key=value ファイル ← コマンドライン引数
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

load_dotenv()

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
CYBERMOBILITY_SEED = int(os.getenv("CYBERMOBILITY_SEED", "0"))
CYBERMOBILITY_THREADS = int(os.getenv("CYBERMOBILITY_THREADS", "1"))
# 2005-06-23T00:00:00Z
PLATFORM_INCEPTION_TS = int(os.getenv("PLATFORM_INCEPTION_TS", "1119484800"))
END_OF_DATA_TS: Optional[int] = int(os.environ["END_OF_DATA_TS"]) if os.getenv("END_OF_DATA_TS") else None

LIST_FIELDS = ("inputs", "id_terms", "s_values", "communities")


class ConfigError(Exception):
    """設定ファイルが読めない・解釈できない場合の例外（終了コード 2）。"""


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # 入出力
    inputs: List[Path] = Field(default_factory=list)
    output_dir: Path = Path("out")
    field_user: str = "author"
    field_community: str = "subreddit"
    field_ts: str = "created_utc"
    threads: int = Field(CYBERMOBILITY_THREADS, ge=1)
    seed: int = CYBERMOBILITY_SEED
    reference_overlays: bool = False

    # クリーニング
    strict: bool = False
    id_terms: List[str] = Field(default_factory=lambda: ["-bot", "_transcriber", "Moderator"], min_length=1)
    case_insensitive_terms: bool = False
    anchored_terms: bool = False
    frequency_threshold: int = Field(50_000, ge=1)
    inception_ts: int = PLATFORM_INCEPTION_TS
    end_of_data_ts: Optional[int] = END_OF_DATA_TS
    start_ts: Optional[int] = None
    end_ts: Optional[int] = None

    # 分布・ランダムウォーク
    ccdf_fit_min: Optional[float] = None
    ccdf_fit_max: Optional[float] = None
    horizon_hours: int = Field(720, ge=1)
    mu_fit_min: Optional[float] = None
    mu_fit_max: Optional[float] = None
    s_values: List[int] = Field(default_factory=lambda: [10, 20, 30, 40, 50], min_length=1)
    zipf_max_distinct: Optional[int] = None
    zeta_fit_min: Optional[float] = None
    zeta_fit_max: Optional[float] = None

    # 時間特性
    max_hours: int = Field(720, ge=1)
    tz_map: Optional[Path] = None
    communities: Optional[List[str]] = None

    # ランダム性・パターン
    min_distinct: int = Field(2, ge=0)
    min_visits: int = Field(1000, ge=0)
    cutoff_ts: Optional[int] = None
    num_stages: int = Field(20, ge=2)
    k: int = Field(3, ge=1)
    scaling_mode: Literal["raw", "per-feature-max"] = "raw"
    nmf_max_iter: int = Field(500, ge=1)
    nmf_tol: float = Field(1e-5, ge=0.0)

    # 分類
    labels_path: Optional[Path] = None
    min_users: int = Field(50, ge=1)
    train_fraction: float = Field(0.8, gt=0.0, lt=1.0)
    stratify: bool = False
    l2_strength: float = Field(1.0, ge=0.0)
    lr_max_iter: int = Field(1000, ge=1)
    top_n: int = Field(20, ge=1)

    # シミュレーション
    sim_model: Literal["epr", "zipf", "periodic", "cohorts"] = "cohorts"
    sim_users: Optional[int] = Field(None, ge=1)
    sim_rho: float = Field(0.6, gt=0.0, le=1.0)
    sim_gamma: float = Field(0.21, ge=0.0)
    sim_steps: int = Field(2000, ge=1)
    sim_inter_event_seconds: int = Field(3600, ge=1)
    sim_arrivals: Literal["regular", "poisson"] = "regular"
    sim_s: int = Field(50, ge=2)
    sim_zeta: float = Field(1.12, ge=0.0)
    sim_visits: Optional[int] = Field(None, ge=1)
    sim_period_hours: int = Field(24, ge=1)
    sim_jitter_seconds: int = Field(0, ge=0, lt=3600)
    sim_skip_probability: float = Field(0.0, ge=0.0, lt=1.0)

    @field_validator(*LIST_FIELDS, mode="before")
    @classmethod
    def _split_list(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    @field_validator("inputs", "tz_map", "labels_path")
    @classmethod
    def _must_exist(cls, value: Any) -> Any:
        paths = value if isinstance(value, list) else [value]
        for path in paths:
            if path is not None and not Path(path).is_file():
                raise ValueError(f"file not found: {path}")
        return value

    @model_validator(mode="after")
    def _check_ranges(self) -> "RunConfig":
        if (self.start_ts is None) != (self.end_ts is None):
            raise ValueError("start_ts and end_ts must be given together")
        if self.start_ts is not None and self.start_ts >= self.end_ts:
            raise ValueError("start_ts must be earlier than end_ts")
        if any(s < 2 for s in self.s_values):
            raise ValueError("every S value must be >= 2")
        if self.zipf_max_distinct is not None and self.zipf_max_distinct < max(self.s_values):
            raise ValueError("zipf_max_distinct must be >= every S value")
        for lo, hi, name in (
            (self.ccdf_fit_min, self.ccdf_fit_max, "ccdf_fit"),
            (self.mu_fit_min, self.mu_fit_max, "mu_fit"),
            (self.zeta_fit_min, self.zeta_fit_max, "zeta_fit"),
        ):
            if lo is not None and hi is not None and lo >= hi:
                raise ValueError(f"{name}_min must be below {name}_max")
        return self

    def snapshot(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


def read_config_file(path: Path) -> Dict[str, str]:
    """フラットな key=value ファイルを読む（# コメント可）。"""
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        values = dotenv_values(path)
    except Exception as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    out: Dict[str, str] = {}
    for key, value in values.items():
        if value is None:
            raise ConfigError(f"config file {path}: '{key}' has no value")
        out[key.strip().lower().replace("-", "_")] = value
    return out


def load_run_config(
    overrides: Optional[Mapping[str, Any]] = None,
    config_file: Optional[Path] = None,
) -> RunConfig:
    """設定ファイルとフラグを重ねて RunConfig を作る。値が None のフラグは無視する。"""
    values: Dict[str, Any] = {}
    if config_file is not None:
        values.update(read_config_file(Path(config_file)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return RunConfig(**values)
