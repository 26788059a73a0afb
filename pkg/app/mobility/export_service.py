"""
分析結果を CSV / JSON 文字列に変換するサービス

列定義は docs/formats.md と一致させること。
"""
import csv
import json
import logging
from io import StringIO
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from app.mobility.formatting import format_number

logger = logging.getLogger(__name__)


class MobilityExportService:
    """分析結果の CSV / JSON 生成サービス"""

    CCDF_COLUMNS = ["value", "prob"]
    CANDIDATE_COLUMNS = ["user", "post_count"]
    EXPLORATION_COLUMNS = ["t", "S"]
    ZIPF_COLUMNS = ["k", "f"]
    FIT_COLUMNS = ["exponent", "intercept", "r_squared", "min", "max", "n"]
    RETURN_COLUMNS = ["t_hours", "prob"]
    HOURLY_COLUMNS = ["hour", "weekday_share", "weekend_share"]
    RANDOMNESS_COLUMNS = ["user", "entropy", "max_frq"]
    LABEL_COLUMNS = ["user", "pattern"]
    ERROR_HISTORY_COLUMNS = ["iteration", "frobenius_error"]
    COEFFICIENT_COLUMNS = ["class", "community", "coefficient", "user_size"]
    CONSTANT_COLUMNS = ["quantity", "value", "uncertainty", "description"]
    MARKER_COLUMNS = ["day_type", "hour", "marker", "note"]

    def generate_csv(self, columns: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> str:
        """
        行データから CSV を生成

        Args:
            columns: ヘッダー（列順）
            rows: 各行の dict。数値は format_number で文字列化する

        Returns:
            str: LF 改行の CSV 文字列
        """
        csv_buffer = StringIO()
        writer = csv.DictWriter(
            csv_buffer,
            fieldnames=list(columns),
            extrasaction='ignore',
            lineterminator='\n',
        )
        writer.writeheader()

        count = 0
        for row in rows:
            writer.writerow({key: format_number(value) for key, value in row.items()})
            count += 1

        csv_content = csv_buffer.getvalue()
        csv_buffer.close()
        logger.debug("Generated CSV with %d rows (%s)", count, ",".join(columns))
        return csv_content

    def generate_json(self, payload: Any) -> str:
        """キー順固定・インデント 2 の JSON（末尾改行つき）"""
        return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"

    # --- 分布 -------------------------------------------------------------

    def ccdf_csv(self, points: Sequence[Tuple[float, float]]) -> str:
        return self.generate_csv(self.CCDF_COLUMNS, ({"value": v, "prob": p} for v, p in points))

    def candidates_csv(self, candidates: Sequence[Tuple[str, int]]) -> str:
        return self.generate_csv(self.CANDIDATE_COLUMNS, ({"user": u, "post_count": n} for u, n in candidates))

    def exploration_csv(self, points: Sequence[Tuple[int, float]]) -> str:
        return self.generate_csv(self.EXPLORATION_COLUMNS, ({"t": t, "S": s} for t, s in points))

    def zipf_csv(self, points: Sequence[Tuple[int, float]]) -> str:
        return self.generate_csv(self.ZIPF_COLUMNS, ({"k": k, "f": f} for k, f in points))

    def fit_csv(self, fit: Optional[Any]) -> str:
        """One row per power-law fit; a fit that could not be made leaves only the header."""
        rows = []
        if fit is not None:
            low, high = fit.fit_range
            rows.append(
                {
                    "exponent": fit.exponent,
                    "intercept": fit.intercept,
                    "r_squared": fit.r_squared,
                    "min": low,
                    "max": high,
                    "n": fit.n_points,
                }
            )
        return self.generate_csv(self.FIT_COLUMNS, rows)

    # --- 時間特性 ---------------------------------------------------------

    def return_probability_csv(self, bins: Sequence[float]) -> str:
        rows = ({"t_hours": t, "prob": p} for t, p in enumerate(bins, start=1))
        return self.generate_csv(self.RETURN_COLUMNS, rows)

    def hourly_profile_csv(self, weekday: Sequence[float], weekend: Sequence[float]) -> str:
        rows = (
            {"hour": h, "weekday_share": weekday[h], "weekend_share": weekend[h]} for h in range(len(weekday))
        )
        return self.generate_csv(self.HOURLY_COLUMNS, rows)

    # --- ランダム性・パターン ---------------------------------------------

    def randomness_csv(self, users: Iterable[Any]) -> str:
        rows = ({"user": u.user_id, "entropy": u.entropy, "max_frq": u.max_frq} for u in users)
        return self.generate_csv(self.RANDOMNESS_COLUMNS, rows)

    def weights_csv(self, user_ids: Sequence[str], W: Any) -> str:
        k = len(W[0]) if len(W) else 0
        columns = ["user"] + [f"w{j}" for j in range(1, k + 1)]
        rows = (
            {"user": user, **{f"w{j}": float(row[j - 1]) for j in range(1, k + 1)}}
            for user, row in zip(user_ids, W)
        )
        return self.generate_csv(columns, rows)

    def components_csv(self, feature_columns: Sequence[str], H: Any) -> str:
        columns = ["component"] + list(feature_columns)
        rows = (
            {"component": idx, **{name: float(value) for name, value in zip(feature_columns, row)}}
            for idx, row in enumerate(H, start=1)
        )
        return self.generate_csv(columns, rows)

    def labels_csv(self, labels: Mapping[str, Any]) -> str:
        rows = ({"user": user, "pattern": getattr(label, "value", label)} for user, label in sorted(labels.items()))
        return self.generate_csv(self.LABEL_COLUMNS, rows)

    def error_history_csv(self, history: Sequence[float]) -> str:
        rows = ({"iteration": i, "frobenius_error": e} for i, e in enumerate(history))
        return self.generate_csv(self.ERROR_HISTORY_COLUMNS, rows)

    def coefficients_csv(self, rows: Sequence[Dict[str, Any]]) -> str:
        return self.generate_csv(self.COEFFICIENT_COLUMNS, rows)

    # --- 参照値 -----------------------------------------------------------

    def physical_constants_csv(self, constants: Sequence[Mapping[str, Any]]) -> str:
        return self.generate_csv(self.CONSTANT_COLUMNS, constants)

    def hourly_markers_csv(self, markers: Mapping[str, Sequence[Mapping[str, Any]]]) -> str:
        """day_type ごとに 0..23 時の 24 行。マーカーのない時間は空欄。"""
        rows: List[Dict[str, Any]] = []
        for day_type in ("weekday", "weekend"):
            by_hour: Dict[int, Mapping[str, Any]] = {}
            for entry in markers.get(day_type, []):
                for hour in entry.get("hours", []):
                    by_hour[int(hour)] = entry
            for hour in range(24):
                entry = by_hour.get(hour, {})
                rows.append(
                    {
                        "day_type": day_type,
                        "hour": hour,
                        "marker": entry.get("marker", ""),
                        "note": entry.get("note", ""),
                    }
                )
        return self.generate_csv(self.MARKER_COLUMNS, rows)
