from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import pytest

from app.mobility.event import Trajectory

TEST_DATA = Path(__file__).resolve().parent.parent / "test-data"


@pytest.fixture
def sample_events_path() -> Path:
    return TEST_DATA / "sample_events.jsonl"


@pytest.fixture
def make_trajectory():
    def _make(user_id: str, visits: Sequence[Tuple[str, int]]) -> Trajectory:
        return Trajectory(user_id=user_id, visits=list(visits))

    return _make


@pytest.fixture
def write_jsonl(tmp_path):
    """Write dict records (or raw strings) as one JSON document per line."""

    def _write(name: str, records: Iterable) -> Path:
        path = tmp_path / name
        lines: List[str] = []
        for record in records:
            lines.append(record if isinstance(record, str) else json.dumps(record))
        path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        return path

    return _write
