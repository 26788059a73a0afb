"""Seeded synthetic visit generators used as oracles for the estimators.

Every generator derives one RNG per user from ``(seed, user index)`` so a
user's trajectory does not depend on how many users are generated around it.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.mobility.event import Trajectory
from app.mobility.ingest import dump_events
from app.mobility.patterns import DEFAULT_NUM_STAGES, PatternLabel

logger = logging.getLogger(__name__)

DEFAULT_START_TS = 1451606400  # 2016-01-01T00:00:00Z
SECONDS_PER_HOUR = 3600


class EprParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    rho: float = Field(0.6, gt=0.0, le=1.0)
    gamma: float = Field(0.21, ge=0.0)
    n_steps: int = Field(2000, ge=1)
    inter_event_seconds: int = Field(SECONDS_PER_HOUR, ge=1)
    seed: int = 0
    start_ts: int = DEFAULT_START_TS
    arrivals: Literal["regular", "poisson"] = "regular"


class CohortSpec(BaseModel):
    """Generating parameters of one pattern cohort.

    The exploration probability moves linearly from ``explore_start`` in the
    first stage to ``explore_end`` in the last. A non-exploring visit goes to
    the user's home community with probability ``home_share`` and otherwise
    to a random earlier visit. Explorations pick an unvisited community from
    the cohort's own pool with probability ``pool_affinity``, else from the
    shared ``general`` pool.
    """

    model_config = ConfigDict(frozen=True)

    pattern: PatternLabel
    n_users: int = Field(ge=1)
    visits_per_user: int = Field(1200, ge=1)
    num_stages: int = Field(DEFAULT_NUM_STAGES, ge=2)
    explore_start: float = Field(ge=0.0, le=1.0)
    explore_end: float = Field(ge=0.0, le=1.0)
    home_share: float = Field(ge=0.0, le=1.0)
    pool: str = Field(min_length=1)
    pool_size: int = Field(ge=1)
    pool_affinity: float = Field(0.8, ge=0.0, le=1.0)
    general_pool_size: int = Field(600, ge=1)
    inter_event_seconds: int = Field(SECONDS_PER_HOUR, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def _check_feasible(self) -> "CohortSpec":
        if self.visits_per_user < 20 * self.num_stages:
            raise ValueError(
                f"visits_per_user={self.visits_per_user} is below 20 visits per stage "
                f"for {self.num_stages} stages"
            )
        return self


def _user_rng(seed: int, *index: int) -> np.random.Generator:
    return np.random.default_rng([seed, *index])


def _timestamps(rng: np.random.Generator, n: int, start_ts: int, spacing: int, arrivals: str) -> List[int]:
    if arrivals == "poisson":
        gaps = np.floor(rng.exponential(spacing, size=n - 1)).astype(np.int64)
        return (start_ts + np.concatenate([[0], np.cumsum(gaps)])).tolist()
    return [start_ts + i * spacing for i in range(n)]


def simulate_epr(params: EprParams, n_users: int) -> List[Trajectory]:
    """Exploration / preferential-return walkers.

    With ``S`` distinct communities seen so far a step explores with
    probability ``rho * S**-gamma`` (the first step always explores) and
    otherwise revisits a community with probability proportional to its past
    visits. The k-th community a walker discovers is ``c{k:05d}``.
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")

    trajectories: List[Trajectory] = []
    for u in range(n_users):
        rng = _user_rng(params.seed, u)
        draws = rng.random(params.n_steps)
        history: List[int] = []
        distinct = 0
        for step in range(params.n_steps):
            if distinct == 0 or draws[step] < params.rho * distinct ** -params.gamma:
                distinct += 1
                history.append(distinct)
            else:
                history.append(history[int(rng.integers(len(history)))])
        stamps = _timestamps(rng, params.n_steps, params.start_ts, params.inter_event_seconds, params.arrivals)
        trajectories.append(
            Trajectory(user_id=f"epr{u:06d}", visits=[(f"c{k:05d}", ts) for k, ts in zip(history, stamps)])
        )
    logger.info("Simulated %d EPR users x %d steps (rho=%s, gamma=%s)", n_users, params.n_steps, params.rho, params.gamma)
    return trajectories


def zipf_probabilities(S: int, zeta: float) -> np.ndarray:
    weights = np.arange(1, S + 1, dtype=np.float64) ** -zeta
    return weights / weights.sum()


def simulate_zipf_users(
    S: int,
    zeta: float,
    visits_per_user: int,
    n_users: int,
    seed: int = 0,
    *,
    universe_size: Optional[int] = None,
    start_ts: int = DEFAULT_START_TS,
    inter_event_seconds: int = SECONDS_PER_HOUR,
) -> List[Trajectory]:
    """Users whose visits follow an exact Zipf law over their own ``S`` communities.

    The first ``S`` visits enumerate the user's communities once so every
    user has exactly ``S`` distinct communities; the rest are drawn
    independently with ``P(rank k) ∝ k**-zeta``.
    """
    if S < 2:
        raise ValueError("S must be >= 2")
    if zeta < 0:
        raise ValueError("zeta must be >= 0")
    if visits_per_user < S:
        raise ValueError(f"visits_per_user={visits_per_user} cannot cover S={S} communities")
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    universe = universe_size if universe_size is not None else 10 * S
    if universe < S:
        raise ValueError("universe_size must be >= S")

    probs = zipf_probabilities(S, zeta)
    trajectories: List[Trajectory] = []
    for u in range(n_users):
        rng = _user_rng(seed, u)
        owned = rng.choice(universe, size=S, replace=False)
        ranks = np.concatenate([rng.permutation(S), rng.choice(S, size=visits_per_user - S, p=probs)])
        visits = [
            (f"z{owned[r]:04d}", start_ts + i * inter_event_seconds)
            for i, r in enumerate(ranks.tolist())
        ]
        trajectories.append(Trajectory(user_id=f"zipf{u:06d}", visits=visits))
    logger.info("Simulated %d Zipf users (S=%d, zeta=%s, %d visits each)", n_users, S, zeta, visits_per_user)
    return trajectories


def simulate_periodic_returners(
    n_users: int,
    period_hours: int = 24,
    jitter_seconds: int = 0,
    n_visits: int = 60,
    seed: int = 0,
    *,
    skip_probability: float = 0.0,
    start_ts: int = DEFAULT_START_TS,
    user_prefix: str = "periodic",
) -> List[Trajectory]:
    """Users returning to one home community every ``period_hours``.

    A return can skip whole periods (each with ``skip_probability``), and
    arrives up to ``jitter_seconds`` early, so a gap of m periods always
    lands in return bin ``m * period_hours``.

    The jitter is one-sided, not a symmetric +/- offset: each gap is shortened
    by a uniform draw from ``[0, jitter_seconds]``, measured from the previous
    visit, so the offsets accumulate and the schedule drifts earlier over time.
    A symmetric offset could push a gap of m periods into bin
    ``m * period_hours + 1``.
    """
    if period_hours < 1:
        raise ValueError("period_hours must be >= 1")
    if not 0 <= jitter_seconds < SECONDS_PER_HOUR:
        raise ValueError("jitter_seconds must be in [0, 3600)")
    if not 0.0 <= skip_probability < 1.0:
        raise ValueError("skip_probability must be in [0, 1)")
    if n_visits < 2:
        raise ValueError("n_visits must be >= 2")

    period = period_hours * SECONDS_PER_HOUR
    trajectories: List[Trajectory] = []
    for u in range(n_users):
        rng = _user_rng(seed, u)
        ts = start_ts + int(rng.integers(period))
        stamps = [ts]
        for _ in range(n_visits - 1):
            periods = int(rng.geometric(1.0 - skip_probability)) if skip_probability > 0 else 1
            early = int(rng.integers(jitter_seconds + 1)) if jitter_seconds else 0
            ts = ts + periods * period - early
            stamps.append(ts)
        home = f"home{u % 100:02d}"
        trajectories.append(Trajectory(user_id=f"{user_prefix}{u:06d}", visits=[(home, t) for t in stamps]))
    logger.info("Simulated %d periodic returners (period %dh, jitter %ds)", n_users, period_hours, jitter_seconds)
    return trajectories


def _cohort_user(spec: CohortSpec, rng: np.random.Generator, start_ts: int) -> List[Tuple[str, int]]:
    own = [f"{spec.pool}{i:04d}" for i in range(spec.pool_size)]
    shared = [f"general{i:04d}" for i in range(spec.general_pool_size)]
    unseen = {"own": list(rng.permutation(own)), "shared": list(rng.permutation(shared))}

    total = spec.visits_per_user
    stage_of = (np.arange(total) * spec.num_stages) // total
    ramp = spec.explore_start + (spec.explore_end - spec.explore_start) * stage_of / (spec.num_stages - 1)
    draws = rng.random((total, 3))

    history: List[str] = []
    home: Optional[str] = None
    for i in range(total):
        explore = home is None or draws[i, 0] < ramp[i]
        community = None
        if explore:
            first, second = ("own", "shared") if draws[i, 1] < spec.pool_affinity else ("shared", "own")
            source = unseen[first] or unseen[second]
            if source:
                community = source.pop()
        if community is None:
            if draws[i, 2] < spec.home_share:
                community = home
            else:
                community = history[int(rng.integers(len(history)))]
        if home is None:
            home = community
        history.append(community)
    return [(c, start_ts + i * spec.inter_event_seconds) for i, c in enumerate(history)]


def simulate_pattern_cohorts(specs: Sequence[CohortSpec]) -> Tuple[List[Trajectory], Dict[str, PatternLabel]]:
    """Populations with known mobility patterns; returns trajectories and ground-truth labels."""
    if not specs:
        raise ValueError("at least one cohort spec is required")
    trajectories: List[Trajectory] = []
    labels: Dict[str, PatternLabel] = {}
    for ci, spec in enumerate(specs):
        for u in range(spec.n_users):
            rng = _user_rng(spec.seed, ci, u)
            user_id = f"cohort{ci}_{u:05d}"
            start = DEFAULT_START_TS + int(rng.integers(SECONDS_PER_HOUR * 24 * 30))
            trajectories.append(Trajectory(user_id=user_id, visits=_cohort_user(spec, rng, start)))
            labels[user_id] = spec.pattern
        logger.info("Simulated %s cohort: %d users x %d visits", spec.pattern.value, spec.n_users, spec.visits_per_user)
    return trajectories, labels


def default_cohort_specs(
    n_users: Optional[int] = None,
    visits_per_user: Optional[int] = None,
    seed: Optional[int] = None,
) -> List[CohortSpec]:
    """The frozen three-cohort population, optionally resized."""
    from app.mobility.reference_loader import get_reference_loader

    specs = []
    for raw in get_reference_loader().acceptance()["cohorts"]:
        values = dict(raw)
        if n_users is not None:
            values["n_users"] = n_users
        if visits_per_user is not None:
            values["visits_per_user"] = visits_per_user
        if seed is not None:
            values["seed"] = seed
        specs.append(CohortSpec(**values))
    return specs


def events_to_jsonl(trajectories: Sequence[Trajectory]) -> str:
    """Render trajectories as raw event lines with the default dump field names."""
    return dump_events((traj.user_id, community, ts) for traj in trajectories for community, ts in traj.visits)
