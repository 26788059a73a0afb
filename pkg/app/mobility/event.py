from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

DELETED_USER = "[deleted]"

# 1970-01-01 .. 9999-12-30T23:59:59Z; one day of headroom so local-time conversion stays in range
MIN_TS = 0
MAX_TS = 253_402_214_399

Visit = Tuple[str, int]


class FieldMapping(BaseModel):
    """Names of the three required fields in a raw event record.

    Dotted names (``author.name``) walk into nested objects, which some dump
    formats use for the author block.
    """

    model_config = ConfigDict(frozen=True)

    user: str = "author"
    community: str = "subreddit"
    ts: str = "created_utc"

    def lookup(self, record: Dict[str, Any], name: str) -> Any:
        value: Any = record
        for part in name.split("."):
            if not isinstance(value, dict) or part not in value:
                return None
            value = value[part]
        return value


DEFAULT_FIELD_MAPPING = FieldMapping()


class Event(BaseModel):
    """One post: the atomic visit of a user to a community.

    The rest of the package works on plain tuples once trajectories are
    built; this model is the single validation point for raw records.
    """

    model_config = ConfigDict(frozen=True)

    user_id: str = Field(min_length=1)
    community_id: str = Field(min_length=1)
    ts: int

    @field_validator("user_id", "community_id", mode="before")
    @classmethod
    def _coerce_id(cls, value: Any) -> str:
        if value is None or isinstance(value, (dict, list, bool)):
            raise ValueError("identifier must be a scalar")
        return str(value)

    @field_validator("ts", mode="before")
    @classmethod
    def _coerce_ts(cls, value: Any) -> int:
        # Older dumps store created_utc as a numeric string.
        if isinstance(value, bool) or value is None:
            raise ValueError("timestamp is required")
        if isinstance(value, str):
            raw = value.strip()
            try:
                value = int(raw)
            except ValueError:
                value = float(raw)
        if isinstance(value, float):
            if not math.isfinite(value):
                raise ValueError(f"timestamp is not finite: {value!r}")
            value = math.floor(value)
        if isinstance(value, int) and not MIN_TS <= value <= MAX_TS:
            raise ValueError(f"timestamp {value} is outside the representable calendar range")
        return value


@dataclass
class Trajectory:
    """A user's visit history across communities, oldest first."""

    user_id: str
    visits: List[Visit] = field(default_factory=list)

    def __post_init__(self):
        if not self.visits:
            raise ValueError(f"trajectory for user {self.user_id!r} has no visits")

    def __len__(self) -> int:
        return len(self.visits)

    @property
    def communities(self) -> List[str]:
        return [community for community, _ in self.visits]

    @property
    def timestamps(self) -> List[int]:
        return [ts for _, ts in self.visits]

    @property
    def first_ts(self) -> int:
        return self.visits[0][1]

    @property
    def last_ts(self) -> int:
        return self.visits[-1][1]

    def distinct_count(self) -> int:
        return len(set(self.communities))

    def to_record(self) -> Dict[str, Any]:
        return {"user": self.user_id, "visits": [[c, ts] for c, ts in self.visits]}

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "Trajectory":
        visits = [(str(c), int(ts)) for c, ts in record["visits"]]
        return cls(user_id=str(record["user"]), visits=visits)


def iter_trajectories(trajectories: Any) -> Iterable[Trajectory]:
    """Accept either a ``user_id -> Trajectory`` mapping or an iterable of trajectories."""
    if isinstance(trajectories, dict):
        return trajectories.values()
    return trajectories


def event_from_record(record: Any, mapping: Optional[FieldMapping] = None) -> Event:
    """Map one decoded JSON record onto an Event; raises ValueError when a field is missing or bad."""
    if not isinstance(record, dict):
        raise ValueError("record is not a JSON object")
    mapping = mapping or DEFAULT_FIELD_MAPPING
    names = (mapping.user, mapping.community, mapping.ts)
    values = [mapping.lookup(record, name) for name in names]
    missing = [name for name, value in zip(names, values) if value is None]
    if missing:
        raise ValueError(f"missing field(s): {', '.join(missing)}")
    user_id, community_id, ts = values
    return Event(user_id=user_id, community_id=community_id, ts=ts)
