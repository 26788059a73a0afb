"""イベントログの取り込みとクリーニング。

生の投稿ログ（1 行 1 JSON）を Event に正規化し、以下の順でクリーニングしてから
ユーザーごとの trajectory（訪問履歴）を組み立てます。

1) `[deleted]` ユーザーの除去
2) 名前に bot 系の語を含むアカウントの除去（語リストによる部分一致）
3) 投稿数が異常に多いアカウントの列挙（自動除去はしない、目視確認用）

投稿数の閾値は語リストを見つけるための補助で、除去そのものは語の一致だけで行います。
"""

from __future__ import annotations

import json
import logging
from collections import Counter, OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, BinaryIO, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from app.mobility.event import (
    DELETED_USER,
    Event,
    FieldMapping,
    Trajectory,
    event_from_record,
)

logger = logging.getLogger(__name__)

DEFAULT_NONHUMAN_TERMS: Tuple[str, ...] = ("-bot", "_transcriber", "Moderator")
DEFAULT_FREQUENCY_THRESHOLD = 50_000
MAX_ERROR_MESSAGES = 20

Line = Union[bytes, str]


class EventParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no
        self.message = message

    def __reduce__(self):
        # raised inside parser worker processes
        return (type(self), (self.line_no, self.message))


@dataclass
class ParseResult:
    events: List[Event]
    total_lines: int = 0
    error_count: int = 0
    errors: List[str] = field(default_factory=list)

    def __getstate__(self) -> Dict[str, Any]:
        # Events cross process boundaries as three flat columns; they were
        # validated once in the worker.
        state = dict(self.__dict__)
        events = state.pop("events")
        state["columns"] = (
            [e.user_id for e in events],
            [e.community_id for e in events],
            [e.ts for e in events],
        )
        return state

    def __setstate__(self, state: Dict[str, Any]) -> None:
        state = dict(state)
        users, communities, stamps = state.pop("columns")
        state["events"] = [
            Event.model_construct(user_id=u, community_id=c, ts=ts) for u, c, ts in zip(users, communities, stamps)
        ]
        self.__dict__.update(state)

    @classmethod
    def merge(cls, parts: Sequence["ParseResult"]) -> "ParseResult":
        """Concatenate chunk results in order; error messages stay capped."""
        merged = cls(events=[])
        for part in parts:
            merged.events.extend(part.events)
            merged.total_lines += part.total_lines
            merged.error_count += part.error_count
            merged.errors.extend(part.errors[: MAX_ERROR_MESSAGES - len(merged.errors)])
        return merged


@dataclass
class CleaningReport:
    """Accounting of everything removed between the raw log and the trajectories.

    ``total_events = removed_deleted + removed_nonhuman + removed_out_of_window + surviving_events``
    """

    total_events: int = 0
    removed_deleted: int = 0
    removed_nonhuman: int = 0
    removed_accounts: int = 0
    removed_out_of_window: int = 0
    malformed_lines: int = 0
    flagged_candidates: List[Tuple[str, int]] = field(default_factory=list)

    def __post_init__(self):
        counts = (
            self.total_events,
            self.removed_deleted,
            self.removed_nonhuman,
            self.removed_accounts,
            self.removed_out_of_window,
        )
        if any(c < 0 for c in counts):
            raise ValueError("cleaning counts must be non-negative")
        if self.removed_deleted + self.removed_nonhuman + self.removed_out_of_window > self.total_events:
            raise ValueError("removed events exceed total events")

    @property
    def surviving_events(self) -> int:
        return self.total_events - self.removed_deleted - self.removed_nonhuman - self.removed_out_of_window

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["flagged_candidates"] = [[user, count] for user, count in self.flagged_candidates]
        data["surviving_events"] = self.surviving_events
        return data


def _decode(line: Line) -> str:
    if isinstance(line, bytes):
        return line.decode("utf-8")
    return line


def parse_events(
    stream: Iterable[Line],
    field_mapping: Optional[FieldMapping] = None,
    *,
    strict: bool = False,
    inception_ts: Optional[int] = None,
    end_ts: Optional[int] = None,
    first_line_no: int = 1,
) -> ParseResult:
    """Parse line-oriented JSON into Events, preserving input order.

    Blank lines are ignored. In lenient mode a malformed line (bad JSON, bad
    UTF-8, missing field, timestamp outside the platform window) is counted
    and skipped; in strict mode the first one raises ``EventParseError``.
    ``first_line_no`` is the file line number of the first line in ``stream``
    when it is a chunk of a larger file.
    """

    mapping = field_mapping or FieldMapping()
    result = ParseResult(events=[])

    for line_no, raw in enumerate(stream, start=first_line_no):
        try:
            text = _decode(raw).strip()
        except UnicodeDecodeError as e:
            _record_error(result, line_no, f"invalid UTF-8: {e}", strict)
            continue
        if not text:
            continue
        result.total_lines += 1
        try:
            event = event_from_record(json.loads(text), mapping)
        except ValueError as e:
            # json.JSONDecodeError and pydantic.ValidationError are both ValueErrors.
            _record_error(result, line_no, str(e).splitlines()[0], strict)
            continue
        if inception_ts is not None and event.ts < inception_ts:
            _record_error(result, line_no, f"timestamp {event.ts} predates platform inception", strict)
            continue
        if end_ts is not None and event.ts > end_ts:
            _record_error(result, line_no, f"timestamp {event.ts} is after end of data", strict)
            continue
        result.events.append(event)

    if result.error_count:
        logger.warning("Skipped %d malformed line(s) out of %d", result.error_count, result.total_lines)
    return result


def _record_error(result: ParseResult, line_no: int, message: str, strict: bool) -> None:
    if strict:
        raise EventParseError(line_no, message)
    result.error_count += 1
    logger.debug("line %d skipped: %s", line_no, message)
    if len(result.errors) < MAX_ERROR_MESSAGES:
        result.errors.append(f"line {line_no}: {message}")


@dataclass(frozen=True)
class FileChunk:
    """A byte range of an input file that starts and ends on line boundaries."""

    path: Path
    start: int
    end: int
    first_line_no: int = 1


def iter_chunk_lines(f: BinaryIO, start: int, end: int) -> Iterator[bytes]:
    f.seek(start)
    remaining = end - start
    while remaining > 0:
        line = f.readline(remaining)
        if not line:
            break
        remaining -= len(line)
        yield line


def _count_newlines(f: BinaryIO, start: int, end: int, block: int = 1 << 20) -> int:
    f.seek(start)
    remaining = end - start
    count = 0
    while remaining > 0:
        data = f.read(min(block, remaining))
        if not data:
            break
        remaining -= len(data)
        count += data.count(b"\n")
    return count


def plan_chunks(path: Path, n_chunks: int, min_chunk_bytes: int = 1 << 20) -> List[FileChunk]:
    """Split ``path`` into at most ``n_chunks`` line-aligned ranges, in file order.

    Each chunk carries the file line number of its first line so that error
    messages read the same however the file was split.
    """
    path = Path(path)
    size = path.stat().st_size
    n_chunks = max(1, min(n_chunks, size // max(1, min_chunk_bytes)))
    if n_chunks == 1:
        return [FileChunk(path=path, start=0, end=size)]

    bounds = [0]
    with open(path, "rb") as f:
        for i in range(1, n_chunks):
            f.seek(max(size * i // n_chunks, bounds[-1]))
            f.readline()
            position = f.tell()
            if bounds[-1] < position < size:
                bounds.append(position)
        bounds.append(size)

        chunks: List[FileChunk] = []
        line_no = 1
        for start, end in zip(bounds, bounds[1:]):
            chunks.append(FileChunk(path=path, start=start, end=end, first_line_no=line_no))
            line_no += _count_newlines(f, start, end)
    return chunks


def filter_deleted(events: Sequence[Event]) -> List[Event]:
    return [e for e in events if e.user_id != DELETED_USER]


def high_frequency_candidates(
    events: Sequence[Event],
    threshold: int = DEFAULT_FREQUENCY_THRESHOLD,
) -> List[Tuple[str, int]]:
    """Accounts with at least ``threshold`` posts, most active first.

    Advisory only: the list is meant for someone to read and derive new
    id terms from, nothing is removed here.
    """
    if threshold < 1:
        raise ValueError("threshold must be >= 1")
    counts = Counter(e.user_id for e in events)
    flagged = [(user, n) for user, n in counts.items() if n >= threshold]
    flagged.sort(key=lambda item: (-item[1], item[0]))
    return flagged


def _term_matcher(id_terms: Sequence[str], case_sensitive: bool, anchored: bool):
    terms = list(id_terms) if case_sensitive else [t.lower() for t in id_terms]

    def matches(user_id: str) -> bool:
        target = user_id if case_sensitive else user_id.lower()
        if anchored:
            return any(target.endswith(t) for t in terms)
        return any(t in target for t in terms)

    return matches


def filter_nonhuman(
    events: Sequence[Event],
    id_terms: Sequence[str] = DEFAULT_NONHUMAN_TERMS,
    *,
    case_sensitive: bool = True,
    anchored: bool = False,
) -> Tuple[List[Event], CleaningReport]:
    """Drop every event of accounts whose id contains one of ``id_terms``.

    Matching is an exact, case-sensitive substring test by default.
    ``anchored=True`` only accepts the term as a suffix of the id
    (``image_transcriber``, ``AutoModerator``).
    """
    if not id_terms or any(not t for t in id_terms):
        raise ValueError("id_terms must be a non-empty list of non-empty strings")

    matches = _term_matcher(id_terms, case_sensitive, anchored)
    verdicts: Dict[str, bool] = {}
    kept: List[Event] = []
    removed = 0
    for event in events:
        is_bot = verdicts.get(event.user_id)
        if is_bot is None:
            is_bot = verdicts[event.user_id] = matches(event.user_id)
        if is_bot:
            removed += 1
        else:
            kept.append(event)

    removed_accounts = sum(1 for flagged in verdicts.values() if flagged)
    report = CleaningReport(
        total_events=len(events),
        removed_nonhuman=removed,
        removed_accounts=removed_accounts,
    )
    return kept, report


def clean_events(
    events: Sequence[Event],
    *,
    id_terms: Sequence[str] = DEFAULT_NONHUMAN_TERMS,
    case_sensitive: bool = True,
    anchored: bool = False,
    frequency_threshold: int = DEFAULT_FREQUENCY_THRESHOLD,
    malformed_lines: int = 0,
    start_ts: Optional[int] = None,
    end_ts: Optional[int] = None,
) -> Tuple[List[Event], CleaningReport]:
    """Run the full cleaning chain and return the survivors with one combined report.

    With ``start_ts``/``end_ts`` the survivors are also cut to that half-open
    window and the cut is counted as ``removed_out_of_window``.
    """
    without_deleted = filter_deleted(events)
    candidates = high_frequency_candidates(without_deleted, frequency_threshold)
    survivors, nonhuman = filter_nonhuman(
        without_deleted,
        id_terms,
        case_sensitive=case_sensitive,
        anchored=anchored,
    )
    in_window = survivors
    if start_ts is not None or end_ts is not None:
        if start_ts is None or end_ts is None:
            raise ValueError("start_ts and end_ts must be given together")
        in_window = slice_by_time(survivors, start_ts, end_ts)
    report = CleaningReport(
        total_events=len(events),
        removed_deleted=len(events) - len(without_deleted),
        removed_nonhuman=nonhuman.removed_nonhuman,
        removed_accounts=nonhuman.removed_accounts,
        removed_out_of_window=len(survivors) - len(in_window),
        malformed_lines=malformed_lines,
        flagged_candidates=candidates,
    )
    logger.info(
        "Cleaned %d events: %d deleted, %d non-human (%d accounts), %d outside the window, %d candidates flagged",
        report.total_events,
        report.removed_deleted,
        report.removed_nonhuman,
        report.removed_accounts,
        report.removed_out_of_window,
        len(candidates),
    )
    return in_window, report


def build_trajectories(events: Iterable[Event]) -> "OrderedDict[str, Trajectory]":
    """Group events per user and order each history by timestamp.

    The sort is stable, so visits sharing a timestamp keep their input order.
    Users come out sorted by id so the output never depends on input order
    between users.
    """
    grouped: Dict[str, List[Tuple[str, int]]] = {}
    for event in events:
        grouped.setdefault(event.user_id, []).append((event.community_id, event.ts))

    trajectories: "OrderedDict[str, Trajectory]" = OrderedDict()
    for user_id in sorted(grouped):
        visits = sorted(grouped[user_id], key=lambda v: v[1])
        trajectories[user_id] = Trajectory(user_id=user_id, visits=visits)
    return trajectories


def build_trajectories_from_shards(shards: Sequence[Sequence[Event]]) -> "OrderedDict[str, Trajectory]":
    """Merge per-file shards (in file order) into trajectories.

    Shards are concatenated in the order given, not in the order they finished
    parsing, so the result is the same for any number of workers.
    """
    return build_trajectories(event for shard in shards for event in shard)


def slice_by_time(events: Sequence[Event], start_ts: int, end_ts: int) -> List[Event]:
    """Keep events with ``start_ts <= ts < end_ts``."""
    if start_ts >= end_ts:
        raise ValueError(f"start_ts ({start_ts}) must be earlier than end_ts ({end_ts})")
    return [e for e in events if start_ts <= e.ts < end_ts]


def dump_events(rows: Iterable[Tuple[str, str, int]], field_mapping: Optional[FieldMapping] = None) -> str:
    """Write ``(user, community, ts)`` rows back out in the raw event format."""
    mapping = field_mapping or FieldMapping()
    return "".join(
        json.dumps(
            {mapping.user: user, mapping.community: community, mapping.ts: ts},
            ensure_ascii=False,
            separators=(",", ":"),
        )
        + "\n"
        for user, community, ts in rows
    )


def dump_trajectories(trajectories: Any) -> str:
    lines = []
    for traj in trajectories.values() if isinstance(trajectories, dict) else trajectories:
        lines.append(json.dumps(traj.to_record(), ensure_ascii=False, separators=(",", ":")))
    return "".join(line + "\n" for line in lines)


def load_trajectories(stream: Iterable[Line]) -> "OrderedDict[str, Trajectory]":
    """Read the ``{"user": ..., "visits": [[community, ts], ...]}`` line format."""
    out: "OrderedDict[str, Trajectory]" = OrderedDict()
    for line_no, raw in enumerate(stream, start=1):
        text = _decode(raw).strip()
        if not text:
            continue
        try:
            traj = Trajectory.from_record(json.loads(text))
        except (KeyError, TypeError, ValueError) as e:
            raise EventParseError(line_no, f"bad trajectory record: {e}") from e
        if any(a[1] > b[1] for a, b in zip(traj.visits, traj.visits[1:])):
            raise EventParseError(line_no, f"visits of user {traj.user_id!r} are not in time order")
        if traj.user_id in out:
            raise EventParseError(line_no, f"duplicate trajectory for user {traj.user_id!r}")
        out[traj.user_id] = traj
    return out
