"""ライフスパンの段階分割と移動パターンの抽出。

ユーザーの訪問履歴を訪問数で等分した 20 段階（各 5%）に分け、段階ごとに
entropy / max_frq / P(new_comm) を計算して 59 次元のベクトルにします。
全ユーザーのベクトルを行列に積み、NMF（`app.mobility.nmf`）で分解した成分に
パターン名（Exploratory I / Exploratory II / Concentrated）を付けます。

成分の命名は entropy の傾き（段階に対する最小二乗の傾き）で自動化しています。
傾きが 1e-9 以内で並ぶ場合は自動で決めず、エラーにして手動の命名を求めます。
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np
from scipy import stats

from app.mobility.event import Trajectory, Visit, iter_trajectories
from app.mobility.randomness import (
    DEFAULT_MIN_DISTINCT,
    DEFAULT_MIN_VISITS,
    active_filter,
    distribution_from_communities,
    entropy,
    max_frq,
)

logger = logging.getLogger(__name__)

DEFAULT_NUM_STAGES = 20
SLOPE_TIE_TOLERANCE = 1e-9
SCALING_MODES = ("raw", "per-feature-max")


class PatternLabel(str, Enum):
    EXPLORATORY_I = "EXPLORATORY_I"
    EXPLORATORY_II = "EXPLORATORY_II"
    CONCENTRATED = "CONCENTRATED"


# Tie-break order when a user weighs two patterns equally.
LABEL_ORDER = (PatternLabel.EXPLORATORY_I, PatternLabel.EXPLORATORY_II, PatternLabel.CONCENTRATED)


@dataclass
class StageMetrics:
    user_id: str
    stage_entropy: List[float]
    stage_max_frq: List[float]
    p_new: List[float]

    @property
    def num_stages(self) -> int:
        return len(self.stage_entropy)

    def vector(self) -> List[float]:
        """entropy[1..n] ‖ max_frq[1..n] ‖ p_new[2..n]."""
        return list(self.stage_entropy) + list(self.stage_max_frq) + list(self.p_new)


@dataclass
class MobilityMatrix:
    values: np.ndarray
    user_ids: List[str]
    columns: List[str]
    scaling_mode: str = "raw"
    column_max: List[float] = field(default_factory=list)


@dataclass
class ComponentProfile:
    index: int
    entropy_slope: float
    p_new_slope: float
    mean_max_frq: float


def column_names(num_stages: int = DEFAULT_NUM_STAGES) -> List[str]:
    width = max(2, len(str(num_stages)))
    return (
        [f"ent{i:0{width}d}" for i in range(1, num_stages + 1)]
        + [f"mf{i:0{width}d}" for i in range(1, num_stages + 1)]
        + [f"pn{i:0{width}d}" for i in range(2, num_stages + 1)]
    )


def select_departed_users(
    trajectories: Any,
    cutoff_ts: int,
    min_distinct: int = DEFAULT_MIN_DISTINCT,
    min_visits: int = DEFAULT_MIN_VISITS,
) -> List[Trajectory]:
    """Active users whose last visit happened before ``cutoff_ts``."""
    departed = [traj for traj in iter_trajectories(trajectories) if traj.last_ts < cutoff_ts]
    return active_filter(departed, min_distinct, min_visits)


def segment_stages(trajectory: Trajectory, num_stages: int = DEFAULT_NUM_STAGES) -> List[List[Visit]]:
    """Split the visits into ``num_stages`` contiguous slices of (nearly) equal size.

    Stage ``i`` holds the visits with index ``floor((i-1)*T/n) <= j < floor(i*T/n)``.
    """
    total = len(trajectory)
    if num_stages < 2:
        raise ValueError("num_stages must be >= 2")
    if total < num_stages:
        raise ValueError(
            f"user {trajectory.user_id!r} has {total} visits, fewer than the {num_stages} stages"
        )
    bounds = [(i * total) // num_stages for i in range(num_stages + 1)]
    return [trajectory.visits[bounds[i]: bounds[i + 1]] for i in range(num_stages)]


def stage_metrics(stages: Sequence[Sequence[Visit]], *, user_id: str = "") -> StageMetrics:
    """Per-stage entropy and max_frq, and P(new_comm) from the second stage on.

    P(new_comm) of a stage is the share of its visits that go to communities
    absent from every earlier stage.
    """
    if len(stages) < 2:
        raise ValueError("need at least two stages")
    entropies: List[float] = []
    max_frqs: List[float] = []
    p_new: List[float] = []
    seen: set = set()
    for i, stage in enumerate(stages, start=1):
        if not stage:
            raise ValueError(f"stage {i} of user {user_id!r} is empty")
        communities = [c for c, _ in stage]
        dist = distribution_from_communities(user_id, communities)
        entropies.append(entropy(dist))
        max_frqs.append(max_frq(dist))
        if i > 1:
            fresh = sum(1 for c in communities if c not in seen)
            p_new.append(fresh / len(communities))
        seen.update(dist.counts)
    return StageMetrics(user_id=user_id, stage_entropy=entropies, stage_max_frq=max_frqs, p_new=p_new)


def user_stage_metrics(trajectory: Trajectory, num_stages: int = DEFAULT_NUM_STAGES) -> StageMetrics:
    return stage_metrics(segment_stages(trajectory, num_stages), user_id=trajectory.user_id)


def build_matrix(
    metrics: Sequence[StageMetrics],
    scaling_mode: str = "raw",
    *,
    k: int = 3,
) -> MobilityMatrix:
    """Stack users' stage vectors into an ``n_users x (3n-1)`` matrix.

    ``per-feature-max`` divides each column by its maximum; all-zero columns
    are left at zero.
    """
    if scaling_mode not in SCALING_MODES:
        raise ValueError(f"scaling_mode must be one of {SCALING_MODES}, got {scaling_mode!r}")
    if len(metrics) < k:
        raise ValueError(f"need at least k={k} users to factorize, got {len(metrics)}")
    num_stages = metrics[0].num_stages
    columns = column_names(num_stages)

    rows: List[List[float]] = []
    for m in metrics:
        vec = m.vector()
        if len(vec) != len(columns):
            raise ValueError(f"user {m.user_id!r} has {len(vec)} features, expected {len(columns)}")
        for name, value in zip(columns, vec):
            if not math.isfinite(value):
                raise ValueError(f"non-finite value for user {m.user_id!r} in column {name}")
            if value < 0:
                raise ValueError(f"negative value for user {m.user_id!r} in column {name}")
        rows.append(vec)

    values = np.asarray(rows, dtype=np.float64)
    column_max = values.max(axis=0)
    if scaling_mode == "per-feature-max":
        divisor = np.where(column_max > 0, column_max, 1.0)
        values = values / divisor
    return MobilityMatrix(
        values=values,
        user_ids=[m.user_id for m in metrics],
        columns=columns,
        scaling_mode=scaling_mode,
        column_max=column_max.tolist(),
    )


def _slope(series: np.ndarray) -> float:
    return float(stats.linregress(np.arange(1, len(series) + 1, dtype=np.float64), series).slope)


def describe_components(H: np.ndarray) -> List[ComponentProfile]:
    """Trend summary of each component profile (row of H)."""
    H = np.asarray(H, dtype=np.float64)
    width = H.shape[1]
    if (width + 1) % 3 != 0:
        raise ValueError(f"component width {width} is not 3*num_stages-1")
    n = (width + 1) // 3
    profiles = []
    for idx, row in enumerate(H):
        profiles.append(
            ComponentProfile(
                index=idx,
                entropy_slope=_slope(row[:n]),
                p_new_slope=_slope(row[2 * n:]),
                mean_max_frq=float(row[n: 2 * n].mean()),
            )
        )
    return profiles


def label_components(H: np.ndarray) -> Dict[int, PatternLabel]:
    """Name the three components from their entropy trend.

    Rising entropy is Exploratory I, falling entropy is Exploratory II and
    the remaining component is Concentrated.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.shape[0] != 3:
        raise ValueError(f"automatic labeling needs exactly 3 components, got {H.shape[0]}")
    profiles = describe_components(H)
    slopes = sorted(profiles, key=lambda p: p.entropy_slope)
    for a, b in zip(slopes, slopes[1:]):
        if abs(a.entropy_slope - b.entropy_slope) <= SLOPE_TIE_TOLERANCE:
            raise ValueError(
                f"components {a.index} and {b.index} have the same entropy trend; label them manually"
            )
    labels = {
        slopes[-1].index: PatternLabel.EXPLORATORY_I,
        slopes[0].index: PatternLabel.EXPLORATORY_II,
        slopes[1].index: PatternLabel.CONCENTRATED,
    }
    for p in profiles:
        logger.info(
            "component %d -> %s (entropy slope %.4f, p_new slope %.4f, mean max_frq %.3f)",
            p.index,
            labels[p.index].value,
            p.entropy_slope,
            p.p_new_slope,
            p.mean_max_frq,
        )
    return labels


def assign_patterns(
    W: np.ndarray,
    component_labels: Mapping[int, PatternLabel],
    user_ids: Sequence[str],
) -> Dict[str, PatternLabel]:
    """Give each user the pattern of its heaviest component."""
    W = np.asarray(W, dtype=np.float64)
    if W.shape[0] != len(user_ids):
        raise ValueError("W has a different number of rows than user_ids")
    if sorted(component_labels) != list(range(W.shape[1])):
        raise ValueError("every component of W needs a label")
    rank = {label: LABEL_ORDER.index(label) for label in LABEL_ORDER}

    assigned: Dict[str, PatternLabel] = {}
    for user_id, row in zip(user_ids, W):
        best = float(row.max())
        if best <= 0.0:
            raise ValueError(f"user {user_id!r} has an all-zero weight row")
        tied = [j for j in range(len(row)) if row[j] == best]
        winner = min(tied, key=lambda j: rank[component_labels[j]])
        assigned[user_id] = component_labels[winner]
    return assigned


def pattern_population(assigned: Mapping[str, PatternLabel]) -> Dict[str, int]:
    counts = Counter(label.value for label in assigned.values())
    return {label.value: counts.get(label.value, 0) for label in LABEL_ORDER}
