"""Mobility randomness of single users: entropy and max_frq of the visit distribution."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy import stats

from app.mobility.distributions import empirical_ccdf
from app.mobility.event import Trajectory, iter_trajectories

logger = logging.getLogger(__name__)

DEFAULT_MIN_DISTINCT = 2
DEFAULT_MIN_VISITS = 1000

# (name, metric, comparison, threshold) for the population summary.
REFERENCE_THRESHOLDS: Tuple[Tuple[str, str, str, float], ...] = (
    ("entropy>4", "entropy", ">", 4.0),
    ("entropy<1", "entropy", "<", 1.0),
    ("max_frq>0.8", "max_frq", ">", 0.8),
    ("max_frq>0.9", "max_frq", ">", 0.9),
    ("max_frq<0.3", "max_frq", "<", 0.3),
)


@dataclass
class VisitDistribution:
    user_id: str
    counts: Dict[str, int]
    total_visits: int

    def __post_init__(self):
        if self.total_visits <= 0 or sum(self.counts.values()) != self.total_visits:
            raise ValueError(f"visit counts of {self.user_id!r} do not add up to total_visits")

    @property
    def n(self) -> int:
        return len(self.counts)

    @property
    def probs(self) -> Dict[str, float]:
        return {c: count / self.total_visits for c, count in self.counts.items()}


@dataclass
class UserRandomness:
    user_id: str
    entropy: float
    max_frq: float


@dataclass
class RandomnessDistribution:
    """Population view of the per-user metrics, ready to plot."""

    entropy_ccdf: List[Tuple[float, float]]
    max_frq_ccdf: List[Tuple[float, float]]
    n_users: int
    fractions: Dict[str, float] = field(default_factory=dict)
    means: Dict[str, float] = field(default_factory=dict)
    medians: Dict[str, float] = field(default_factory=dict)


def distribution_from_communities(user_id: str, communities: Sequence[str]) -> VisitDistribution:
    if not communities:
        raise ValueError(f"user {user_id!r} has no visits")
    return VisitDistribution(user_id=user_id, counts=dict(Counter(communities)), total_visits=len(communities))


def visit_distribution(trajectory: Trajectory) -> VisitDistribution:
    return distribution_from_communities(trajectory.user_id, trajectory.communities)


def entropy(dist: VisitDistribution) -> float:
    """Shannon entropy of the visit distribution, in bits."""
    counts = np.fromiter(dist.counts.values(), dtype=np.float64)
    # Clamp the -0.0 a single-community user would otherwise get.
    return max(0.0, float(stats.entropy(counts, base=2)))


def max_frq(dist: VisitDistribution) -> float:
    return max(dist.counts.values()) / dist.total_visits


def user_randomness(trajectory: Trajectory) -> UserRandomness:
    dist = visit_distribution(trajectory)
    return UserRandomness(user_id=trajectory.user_id, entropy=entropy(dist), max_frq=max_frq(dist))


def active_filter(
    trajectories: Any,
    min_distinct: int = DEFAULT_MIN_DISTINCT,
    min_visits: int = DEFAULT_MIN_VISITS,
) -> List[Trajectory]:
    """Users with more than ``min_distinct`` communities and more than ``min_visits`` visits (both strict)."""
    if min_distinct < 0 or min_visits < 0:
        raise ValueError("activity thresholds must be >= 0")
    return [
        traj
        for traj in iter_trajectories(trajectories)
        if traj.distinct_count() > min_distinct and len(traj) > min_visits
    ]


def _fraction(values: Sequence[float], comparison: str, threshold: float) -> float:
    if comparison == ">":
        hits = sum(1 for v in values if v > threshold)
    else:
        hits = sum(1 for v in values if v < threshold)
    return hits / len(values)


def randomness_distribution(users: Iterable[UserRandomness]) -> RandomnessDistribution:
    users = list(users)
    if not users:
        raise ValueError("randomness distribution needs at least one user")

    columns = {
        "entropy": [u.entropy for u in users],
        "max_frq": [u.max_frq for u in users],
    }
    fractions = {
        name: _fraction(columns[metric], comparison, threshold)
        for name, metric, comparison, threshold in REFERENCE_THRESHOLDS
    }
    summary = RandomnessDistribution(
        entropy_ccdf=empirical_ccdf(columns["entropy"]),
        max_frq_ccdf=empirical_ccdf(columns["max_frq"]),
        n_users=len(users),
        fractions=fractions,
        means={k: math.fsum(v) / len(v) for k, v in columns.items()},
        medians={k: float(np.median(v)) for k, v in columns.items()},
    )
    logger.info(
        "Randomness over %d users: %.1f%% with entropy > 4, %.1f%% with max_frq > 0.8",
        summary.n_users,
        100.0 * fractions["entropy>4"],
        100.0 * fractions["max_frq>0.8"],
    )
    return summary
