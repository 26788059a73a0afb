"""Random-walk characteristics of visit histories.

Two curves, each averaged over users:

- exploration curve ``S(t)``: distinct communities visited by the end of
  hour ``t`` of a user's own activity, expected to grow like ``t^mu``;
- rank-frequency curve ``f_k``: relative frequency of a user's k-th most
  visited community, expected to decay like ``k^-zeta``.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import Any, List, Optional, Tuple

import numpy as np

from app.mobility.distributions import FitRange, PowerLawFit, fit_loglog
from app.mobility.event import Trajectory, iter_trajectories

logger = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600


@dataclass
class ExplorationCurve:
    points: List[Tuple[int, float]]
    n_users: int

    @property
    def s_of_t(self) -> List[float]:
        return [s for _, s in self.points]


@dataclass
class RankFrequencyCurve:
    s_value: int
    points: List[Tuple[int, float]]
    n_users: int
    max_distinct: Optional[int] = None

    @property
    def f_of_k(self) -> List[float]:
        return [f for _, f in self.points]


def observed_span_hours(traj: Trajectory) -> int:
    """Number of activity hours from the first visit through the last, inclusive."""
    return (traj.last_ts - traj.first_ts) // SECONDS_PER_HOUR + 1


def user_exploration(traj: Trajectory, horizon_hours: int) -> np.ndarray:
    """``s(t)`` for ``t = 1..horizon_hours`` as an int array.

    Hour 1 covers the first 3600 seconds after the user's first visit.
    """
    first = traj.first_ts
    seen = set()
    discoveries = np.zeros(horizon_hours + 1, dtype=np.int64)
    for community, ts in traj.visits:
        hour = (ts - first) // SECONDS_PER_HOUR + 1
        if hour > horizon_hours:
            break
        if community not in seen:
            seen.add(community)
            discoveries[hour] += 1
    return np.cumsum(discoveries)[1:]


def exploration_curve(trajectories: Any, horizon_hours: int) -> ExplorationCurve:
    """Mean ``s(t)`` over users whose activity spans at least ``horizon_hours``.

    Shorter users are left out rather than padded.
    """
    if horizon_hours < 1:
        raise ValueError("horizon_hours must be >= 1")

    total = np.zeros(horizon_hours, dtype=np.int64)
    n_users = 0
    skipped = 0
    for traj in iter_trajectories(trajectories):
        if observed_span_hours(traj) < horizon_hours:
            skipped += 1
            continue
        total += user_exploration(traj, horizon_hours)
        n_users += 1

    if n_users == 0:
        raise ValueError(f"no user spans the {horizon_hours}-hour horizon")
    logger.info("Exploration curve over %d users (%d shorter users skipped)", n_users, skipped)

    mean = total / n_users
    return ExplorationCurve(
        points=[(t, float(s)) for t, s in enumerate(mean.tolist(), start=1)],
        n_users=n_users,
    )


def fit_mu(curve: ExplorationCurve, fit_range: Optional[FitRange] = None) -> PowerLawFit:
    """OLS of log S on log t; the slope is mu."""
    return fit_loglog(curve.points, fit_range)


def rank_frequencies(traj: Trajectory) -> List[float]:
    """Relative visit frequencies of the user's communities, most visited first.

    Ties are broken by community id so the ranking is deterministic.
    """
    counts = Counter(traj.communities)
    total = len(traj)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return [count / total for _, count in ranked]


def zipf_curve(trajectories: Any, S: int, *, max_distinct: Optional[int] = None) -> RankFrequencyCurve:
    """Average rank-frequency curve of users with exactly ``S`` distinct communities.

    With ``max_distinct`` the selection widens to ``S <= n <= max_distinct``;
    users with fewer communities than the longest rank vector contribute 0 at
    the missing ranks, and trailing all-zero ranks are trimmed.
    """
    if S < 2:
        raise ValueError("S must be >= 2")
    upper = S if max_distinct is None else max_distinct
    if upper < S:
        raise ValueError("max_distinct must be >= S")

    sums = np.zeros(upper, dtype=np.float64)
    n_users = 0
    for traj in iter_trajectories(trajectories):
        n = traj.distinct_count()
        if not S <= n <= upper:
            continue
        freqs = rank_frequencies(traj)
        sums[: len(freqs)] += freqs
        n_users += 1

    if n_users == 0:
        raise ValueError(f"no user visited exactly {S} distinct communities" if max_distinct is None
                         else f"no user visited between {S} and {upper} distinct communities")

    mean = (sums / n_users).tolist()
    while mean and mean[-1] == 0.0:
        mean.pop()
    logger.info("Rank-frequency curve for S=%d over %d users", S, n_users)
    return RankFrequencyCurve(
        s_value=S,
        points=[(k, f) for k, f in enumerate(mean, start=1)],
        n_users=n_users,
        max_distinct=max_distinct,
    )


def fit_zeta(curve: RankFrequencyCurve, fit_range: Optional[FitRange] = None) -> PowerLawFit:
    """OLS of log f_k on log k; zeta is reported as the negated slope."""
    fit = fit_loglog(curve.points, fit_range)
    return replace(fit, exponent=-fit.exponent + 0.0)
