"""Temporal properties: returning probability and weekday/weekend hourly profiles."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone, tzinfo
from typing import Any, Dict, Iterable, List, Optional, Sequence
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from app.mobility.event import Event, iter_trajectories

logger = logging.getLogger(__name__)

SECONDS_PER_HOUR = 3600
DEFAULT_MAX_HOURS = 720
HOURS_PER_DAY = 24

_FIXED_OFFSET = re.compile(r"^(?:UTC|GMT)?\s*([+-])(\d{1,2})(?::?(\d{2}))?$", re.IGNORECASE)
_MIN_OFFSET = timedelta(hours=-12)
_MAX_OFFSET = timedelta(hours=14)


@dataclass
class ReturnHistogram:
    """Return-time distribution; ``bins[t - 1]`` holds the mass of hour ``t``.

    ``n_gaps`` counts every gap, including the ones longer than the last bin
    (``overflow``), so the bins sum to 1 only when nothing overflowed.
    """

    bins: List[float]
    counts: List[int]
    n_gaps: int
    overflow: int = 0

    @property
    def max_hours(self) -> int:
        return len(self.bins)

    def mass(self, t: int) -> float:
        return self.bins[t - 1]


@dataclass
class HourlyProfile:
    weekday: List[float]
    weekend: List[float]
    weekday_posts: int = 0
    weekend_posts: int = 0


@dataclass
class TimezoneMap:
    entries: Dict[str, tzinfo] = field(default_factory=dict)

    def __contains__(self, community_id: str) -> bool:
        return community_id in self.entries

    def zone(self, community_id: str) -> tzinfo:
        return self.entries[community_id]


def gap_bin(gap_seconds: int) -> int:
    """Hour bin of a return gap: ``(t-1)*3600 < g <= t*3600``; a zero gap lands in bin 1."""
    if gap_seconds <= 0:
        return 1
    return (gap_seconds + SECONDS_PER_HOUR - 1) // SECONDS_PER_HOUR


def return_probability(trajectories: Any, max_hours: int = DEFAULT_MAX_HOURS) -> ReturnHistogram:
    """Pool the gaps between consecutive visits to the same community over all users."""
    if max_hours < 1:
        raise ValueError("max_hours must be >= 1")

    counts = [0] * (max_hours + 1)
    overflow = 0
    n_gaps = 0
    for traj in iter_trajectories(trajectories):
        last_seen: Dict[str, int] = {}
        for community, ts in traj.visits:
            previous = last_seen.get(community)
            last_seen[community] = ts
            if previous is None:
                continue
            n_gaps += 1
            t = gap_bin(ts - previous)
            if t > max_hours:
                overflow += 1
            else:
                counts[t] += 1

    if n_gaps == 0:
        raise ValueError("no user returned to any community; the return distribution is undefined")

    binned = counts[1:]
    return ReturnHistogram(
        bins=[c / n_gaps for c in binned],
        counts=binned,
        n_gaps=n_gaps,
        overflow=overflow,
    )


def local_maxima(histogram: ReturnHistogram) -> List[int]:
    """Hours whose mass is strictly greater than both neighbours (edges compare to one side)."""
    mass = histogram.bins
    peaks: List[int] = []
    for i, m in enumerate(mass):
        left = mass[i - 1] if i > 0 else float("-inf")
        right = mass[i + 1] if i + 1 < len(mass) else float("-inf")
        if m > left and m > right:
            peaks.append(i + 1)
    return peaks


def has_periodic_peaks(histogram: ReturnHistogram, period_hours: int = HOURS_PER_DAY, n_periods: int = 3) -> bool:
    """True when every multiple of ``period_hours`` up to ``n_periods`` is a strict local maximum."""
    peaks = set(local_maxima(histogram))
    wanted = [period_hours * m for m in range(1, n_periods + 1)]
    return all(1 < t < histogram.max_hours and t in peaks for t in wanted)


def parse_zone(spec: str) -> tzinfo:
    """An IANA zone name (``America/New_York``) or a fixed offset (``UTC-05:00``, ``+05:30``)."""
    raw = spec.strip()
    match = _FIXED_OFFSET.match(raw)
    if match:
        sign, hours, minutes = match.groups()
        offset = timedelta(hours=int(hours), minutes=int(minutes or 0))
        if sign == "-":
            offset = -offset
        if not _MIN_OFFSET <= offset <= _MAX_OFFSET:
            raise ValueError(f"UTC offset {raw!r} is outside [-12h, +14h]")
        return timezone(offset)
    try:
        return ZoneInfo(raw)
    except (ZoneInfoNotFoundError, ValueError) as e:
        raise ValueError(f"unknown time zone {raw!r}") from e


def load_timezone_map(lines: Iterable[str]) -> TimezoneMap:
    """Parse ``community_id<TAB>zone`` lines; ``#`` starts a comment."""
    entries: Dict[str, tzinfo] = {}
    for line_no, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split("\t")
        if len(parts) != 2 or not parts[0].strip():
            raise ValueError(f"timezone map line {line_no}: expected 'community<TAB>zone'")
        entries[parts[0].strip()] = parse_zone(parts[1])
    return TimezoneMap(entries=entries)


def _normalize(counts: Sequence[int]) -> List[float]:
    total = sum(counts)
    if total == 0:
        return [0.0] * len(counts)
    return [c / total for c in counts]


def hourly_profile(
    events: Iterable[Event],
    tz_map: TimezoneMap,
    community_whitelist: Optional[Sequence[str]] = None,
) -> HourlyProfile:
    """Share of posts per local hour, separately for weekdays and weekends.

    Each post is converted to the civil time of its community's zone; Saturday
    and Sunday in that local calendar count as weekend. Each day type is
    normalized on its own. Without a whitelist every mapped community is used.
    """
    whitelist = list(community_whitelist) if community_whitelist is not None else sorted(tz_map.entries)
    missing = [c for c in whitelist if c not in tz_map]
    if missing:
        raise ValueError(f"community {missing[0]!r} has no time zone in the map")
    allowed = set(whitelist)

    weekday = [0] * HOURS_PER_DAY
    weekend = [0] * HOURS_PER_DAY
    for event in events:
        if event.community_id not in allowed:
            continue
        local = datetime.fromtimestamp(event.ts, tz=tz_map.zone(event.community_id))
        if local.weekday() >= 5:
            weekend[local.hour] += 1
        else:
            weekday[local.hour] += 1

    logger.info("Hourly profile from %d weekday and %d weekend posts", sum(weekday), sum(weekend))
    return HourlyProfile(
        weekday=_normalize(weekday),
        weekend=_normalize(weekend),
        weekday_posts=sum(weekday),
        weekend_posts=sum(weekend),
    )
