from __future__ import annotations

from datetime import timedelta

import numpy as np
import pytest

from app.mobility.event import Event
from app.mobility.synth import simulate_periodic_returners
from app.mobility.temporal import (
    gap_bin,
    has_periodic_peaks,
    hourly_profile,
    load_timezone_map,
    local_maxima,
    parse_zone,
    return_probability,
)

# 2016-01-02 is a Saturday, 2016-01-04 a Monday.
SAT_NOON_UTC = 1451736000
SAT_0300_UTC = 1451703600
MON_1400_UTC = 1451916000


def _brute_force_bins(trajectories, max_hours):
    counts = [0] * max_hours
    n_gaps = 0
    for traj in trajectories:
        for i, (community, ts) in enumerate(traj.visits):
            earlier = [t for c, t in traj.visits[:i] if c == community]
            if not earlier:
                continue
            gap = ts - earlier[-1]
            n_gaps += 1
            t = max(1, -(-gap // 3600))
            if t <= max_hours:
                counts[t - 1] += 1
    return [c / n_gaps for c in counts]


def test_gap_bin_edges():
    assert gap_bin(0) == 1
    assert gap_bin(1) == 1
    assert gap_bin(3600) == 1
    assert gap_bin(3601) == 2
    assert gap_bin(24 * 3600) == 24


def test_return_probability_pools_consecutive_gaps(make_trajectory):
    traj = make_trajectory("u", [("a", 0), ("b", 100), ("a", 3600), ("a", 10800)])
    histogram = return_probability([traj], max_hours=4)
    assert histogram.n_gaps == 2
    assert histogram.bins == [0.5, 0.5, 0.0, 0.0]
    assert histogram.counts == [1, 1, 0, 0]


def test_return_probability_counts_overflow(make_trajectory):
    traj = make_trajectory("u", [("a", 0), ("a", 3600), ("a", 10800)])
    histogram = return_probability([traj], max_hours=1)
    assert histogram.overflow == 1
    assert histogram.bins == [0.5]


def test_return_probability_needs_a_return(make_trajectory):
    with pytest.raises(ValueError, match="returned"):
        return_probability([make_trajectory("u", [("a", 0), ("b", 1)])])
    with pytest.raises(ValueError):
        return_probability([], max_hours=0)


def test_return_probability_matches_enumeration(make_trajectory):
    rng = np.random.default_rng(5)
    for i in range(100):
        n = int(rng.integers(2, 30))
        stamps = np.sort(rng.integers(0, 200 * 3600, size=n)).tolist()
        communities = [f"c{j}" for j in rng.integers(0, 4, size=n).tolist()]
        trajectories = [make_trajectory(f"u{i}", list(zip(communities, stamps)))]
        if len(set(communities)) == n:
            continue
        histogram = return_probability(trajectories, max_hours=240)
        assert histogram.bins == _brute_force_bins(trajectories, 240)


def test_zero_jitter_puts_all_mass_in_the_period_bin():
    histogram = return_probability(simulate_periodic_returners(20, period_hours=24, n_visits=10))
    assert histogram.mass(24) == 1.0
    assert not has_periodic_peaks(histogram)


def test_daily_returners_peak_every_24_hours():
    trajectories = simulate_periodic_returners(
        200, period_hours=24, jitter_seconds=1800, n_visits=60, seed=13, skip_probability=0.5
    )
    histogram = return_probability(trajectories)
    peaks = local_maxima(histogram)
    assert {24, 48, 72} <= set(peaks)
    assert has_periodic_peaks(histogram)


def test_interleaved_periods_show_both_peak_sets():
    daily = simulate_periodic_returners(100, period_hours=24, seed=1, skip_probability=0.5)
    twice_daily = simulate_periodic_returners(
        100, period_hours=12, seed=2, skip_probability=0.5, user_prefix="half"
    )
    histogram = return_probability(daily + twice_daily)
    assert has_periodic_peaks(histogram, period_hours=24)
    assert has_periodic_peaks(histogram, period_hours=12)


def test_parse_zone_offsets_and_names():
    assert parse_zone("UTC-05:00").utcoffset(None) == timedelta(hours=-5)
    assert parse_zone("+05:30").utcoffset(None) == timedelta(hours=5, minutes=30)
    assert parse_zone("America/New_York").key == "America/New_York"
    with pytest.raises(ValueError):
        parse_zone("UTC+15")
    with pytest.raises(ValueError):
        parse_zone("Mars/Olympus_Mons")


def test_load_timezone_map_skips_comments():
    tz_map = load_timezone_map(["# community\tzone\n", "nyc\tAmerica/New_York\n", "\n", "tokyo\t+09:00  # fixed\n"])
    assert "nyc" in tz_map and "tokyo" in tz_map
    with pytest.raises(ValueError, match="line 1"):
        load_timezone_map(["no tab here"])


def test_hourly_profile_uses_local_calendar():
    tz_map = load_timezone_map(["nyc\tUTC-05:00", "london\tUTC+00:00"])
    events = [
        Event(user_id="a", community_id="nyc", ts=MON_1400_UTC),  # Monday 09:00 local
        Event(user_id="a", community_id="nyc", ts=SAT_NOON_UTC),  # Saturday 07:00 local
        Event(user_id="b", community_id="nyc", ts=SAT_0300_UTC),  # Friday 22:00 local
        Event(user_id="b", community_id="london", ts=SAT_0300_UTC),  # Saturday 03:00 local
        Event(user_id="b", community_id="python", ts=SAT_0300_UTC),
    ]
    profile = hourly_profile(events, tz_map)
    assert profile.weekday_posts == 2
    assert profile.weekend_posts == 2
    assert profile.weekday[9] == 0.5 and profile.weekday[22] == 0.5
    assert profile.weekend[7] == 0.5 and profile.weekend[3] == 0.5
    assert sum(profile.weekday) == pytest.approx(1.0)

    only_nyc = hourly_profile(events, tz_map, ["nyc"])
    assert only_nyc.weekend == [0.0] * 7 + [1.0] + [0.0] * 16


def test_hourly_profile_rejects_unmapped_whitelist():
    tz_map = load_timezone_map(["nyc\tUTC-05:00"])
    with pytest.raises(ValueError, match="python"):
        hourly_profile([], tz_map, ["nyc", "python"])


def test_hourly_profile_of_a_uniform_week_is_flat():
    tz_map = load_timezone_map(["utc\t+00:00"])
    events = [Event(user_id="u", community_id="utc", ts=MON_1400_UTC + h * 3600) for h in range(7 * 24)]
    profile = hourly_profile(events, tz_map)
    assert profile.weekday == pytest.approx([1 / 24] * 24)
    assert profile.weekend == pytest.approx([1 / 24] * 24)

    week_later = [Event(user_id=e.user_id, community_id=e.community_id, ts=e.ts + 7 * 86400) for e in events[::5]]
    assert hourly_profile(week_later, tz_map) == hourly_profile(events[::5], tz_map)


def test_hourly_profile_crosses_the_date_line_backwards():
    # 2016-01-01 00:00 UTC is Thursday 19:00 at UTC-05:00.
    tz_map = load_timezone_map(["nyc\tUTC-05:00"])
    profile = hourly_profile([Event(user_id="u", community_id="nyc", ts=1451606400)], tz_map)
    assert profile.weekday_posts == 1 and profile.weekend_posts == 0
    assert profile.weekday[19] == 1.0


def test_hourly_profile_follows_daylight_saving():
    tz_map = load_timezone_map(["nyc\tAmerica/New_York"])
    july_1400_utc = 1467381600  # Friday 2016-07-01
    summer = hourly_profile([Event(user_id="u", community_id="nyc", ts=july_1400_utc)], tz_map)
    winter = hourly_profile([Event(user_id="u", community_id="nyc", ts=MON_1400_UTC)], tz_map)
    assert summer.weekday[10] == 1.0
    assert winter.weekday[9] == 1.0
