"""Visit-count histograms, CCDFs and log-log power-law fits."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.mobility.event import iter_trajectories

logger = logging.getLogger(__name__)

FitRange = Tuple[Optional[float], Optional[float]]


@dataclass
class CountHistogram:
    entries: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for key, count in self.entries.items():
            if count < 0:
                raise ValueError(f"negative count for {key!r}")
        self.entries = {key: int(count) for key, count in self.entries.items() if count > 0}

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class CcdfCurve:
    """Points ``(v, P(X >= v))`` for every distinct observed value ``v``."""

    points: List[Tuple[float, float]]

    def __post_init__(self):
        if not self.points:
            raise ValueError("a CCDF needs at least one point")
        if self.points[0][1] != 1.0:
            raise ValueError("CCDF must start at probability 1.0")
        for (v0, p0), (v1, p1) in zip(self.points, self.points[1:]):
            if not v1 > v0 or p1 > p0:
                raise ValueError("CCDF values must increase strictly with non-increasing probabilities")

    @property
    def values(self) -> List[float]:
        return [v for v, _ in self.points]

    @property
    def probs(self) -> List[float]:
        return [p for _, p in self.points]


@dataclass
class PowerLawFit:
    exponent: float
    intercept: float
    r_squared: float
    fit_range: Tuple[float, float]
    n_points: int
    stderr: float = 0.0

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("a power-law fit needs at least 3 points")
        if not self.fit_range[0] < self.fit_range[1]:
            raise ValueError("fit range must span more than one value")


def community_visit_counts(trajectories: Any) -> CountHistogram:
    counts: Counter = Counter()
    for traj in iter_trajectories(trajectories):
        counts.update(traj.communities)
    return CountHistogram(entries=dict(counts))


def user_visit_counts(trajectories: Any) -> CountHistogram:
    return CountHistogram(entries={traj.user_id: len(traj) for traj in iter_trajectories(trajectories)})


def empirical_ccdf(values: Sequence[float]) -> List[Tuple[float, float]]:
    """``(v, P(X >= v))`` for each distinct value of a real-valued sample.

    Probabilities are computed as ``(n - #below) / n`` on Python ints so the
    result is exactly what a direct count gives.
    """
    if len(values) == 0:
        raise ValueError("cannot build a CCDF from an empty sample")
    distinct, counts = np.unique(np.asarray(values), return_counts=True)
    n = int(counts.sum())
    points: List[Tuple[float, float]] = []
    below = 0
    for value, count in zip(distinct.tolist(), counts.tolist()):
        points.append((value, (n - below) / n))
        below += int(count)
    return points


def ccdf(histogram: CountHistogram) -> CcdfCurve:
    if not histogram.entries:
        raise ValueError("cannot build a CCDF from an empty histogram")
    points = empirical_ccdf(list(histogram.entries.values()))
    return CcdfCurve(points=[(int(v), p) for v, p in points])


def fit_loglog(
    curve_points: Sequence[Tuple[float, float]],
    fit_range: Optional[FitRange] = None,
) -> PowerLawFit:
    """OLS of log10(y) on log10(x) restricted to ``fit_range`` (inclusive).

    The exponent is the fitted slope, so heavy tails come out negative.
    Points with a non-positive coordinate are ignored.
    """
    lo, hi = fit_range if fit_range is not None else (None, None)
    usable = [
        (float(x), float(y))
        for x, y in curve_points
        if x > 0 and y > 0 and (lo is None or x >= lo) and (hi is None or x <= hi)
    ]
    if len(usable) < 3:
        raise ValueError(f"need at least 3 positive points inside the fit range, got {len(usable)}")
    xs = np.log10([x for x, _ in usable])
    ys = np.log10([y for _, y in usable])
    if np.ptp(xs) == 0:
        raise ValueError("fit range contains a single distinct value")

    reg = stats.linregress(xs, ys)
    residuals = ys - (reg.intercept + reg.slope * xs)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    # A flat series is an exact fit; guard against rounding in the mean.
    if ss_tot <= np.finfo(float).eps * max(1.0, float(np.sum(ys**2))):
        r_squared = 1.0
    else:
        r_squared = min(1.0, max(0.0, 1.0 - float(np.sum(residuals**2)) / ss_tot))

    stderr = float(reg.stderr) if math.isfinite(reg.stderr) else 0.0
    return PowerLawFit(
        exponent=float(reg.slope),
        intercept=float(reg.intercept),
        r_squared=r_squared,
        fit_range=(min(x for x, _ in usable), max(x for x, _ in usable)),
        n_points=len(usable),
        stderr=stderr,
    )
