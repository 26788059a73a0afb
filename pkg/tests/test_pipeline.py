from __future__ import annotations

import pytest

import app.mobility.pipeline as pipeline
from app.mobility.ingest import EventParseError
from app.mobility.pipeline import (
    StepResult,
    emit_reference_overlays,
    is_trajectory_file,
    load_events,
    prepare_input,
    read_labels,
    run_step,
)
from app.mobility.reference_loader import get_reference_loader
from config import RunConfig


def test_reference_overlays_are_static(tmp_path):
    first = emit_reference_overlays(tmp_path / "a")
    second = emit_reference_overlays(tmp_path / "b")
    assert [p.name for p in first] == ["reference_hourly_physical.csv", "reference_physical_constants.csv"]
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()

    constants = (tmp_path / "a" / "reference_physical_constants.csv").read_text(encoding="utf-8")
    assert "0.6,0.02" in constants
    assert "1.2,0.1" in constants


def test_reference_loader_is_cached():
    loader = get_reference_loader()
    assert loader is get_reference_loader()
    assert {c["quantity"] for c in loader.physical_constants()} >= {"mu", "zeta"}
    assert "nyc" in loader.timezone_map()


def test_step_result_counts_rows():
    result = StepResult(step="dist")
    result.add("a.csv", "x,y\n1,2\n3,4\n")
    result.add("b.jsonl", "{}\n{}\n{}\n")
    result.add("c.json", "{}\n")
    assert result.row_counts == {"a.csv": 2, "b.jsonl": 3, "c.json": 1}


def test_input_kind_detection(write_jsonl):
    raw = write_jsonl("raw.jsonl", ["", {"author": "a", "subreddit": "x", "created_utc": 1451606400}])
    traj = write_jsonl("traj.jsonl", [{"user": "a", "visits": [["x", 1451606400]]}])
    assert not is_trajectory_file(raw)
    assert is_trajectory_file(traj)

    with pytest.raises(ValueError, match="mix"):
        prepare_input(RunConfig(inputs=[raw, traj]))


def test_time_slice_applies_to_trajectory_input(write_jsonl):
    traj = write_jsonl("traj.jsonl", [
        {"user": "a", "visits": [["x", 100], ["y", 200], ["z", 300]]},
        {"user": "b", "visits": [["x", 300]]},
    ])
    prepared = prepare_input(RunConfig(inputs=[traj], start_ts=150, end_ts=300))
    assert list(prepared.trajectories) == ["a"]
    assert prepared.trajectories["a"].visits == [("y", 200)]


def test_read_labels(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("user,pattern\nu1,CONCENTRATED\n", encoding="utf-8")
    assert read_labels(path) == {"u1": "CONCENTRATED"}
    bad = tmp_path / "bad.csv"
    bad.write_text("name,label\nu1,x\n", encoding="utf-8")
    with pytest.raises(ValueError, match="'user' and 'pattern'"):
        read_labels(bad)


def test_unknown_step():
    with pytest.raises(KeyError):
        run_step("teleport", RunConfig())


def _numbered_events(write_jsonl, name, count):
    records = []
    for i in range(count):
        if i % 11 == 4:
            records.append("{broken")
        else:
            records.append({"author": f"u{i % 7}", "subreddit": f"c{i % 4}", "created_utc": 1451606400 + i})
    return write_jsonl(name, records)


def test_worker_processes_match_single_process(write_jsonl, monkeypatch):
    first = _numbered_events(write_jsonl, "a.jsonl", 60)
    second = _numbered_events(write_jsonl, "b.jsonl", 25)
    single = load_events(RunConfig(inputs=[first, second], threads=1))

    monkeypatch.setattr(pipeline, "MIN_CHUNK_BYTES", 256)
    sharded = load_events(RunConfig(inputs=[first, second], threads=3))

    assert len(sharded) == 2
    for a, b in zip(single, sharded):
        assert [(e.user_id, e.community_id, e.ts) for e in a.events] == [
            (e.user_id, e.community_id, e.ts) for e in b.events
        ]
        assert a.errors == b.errors
        assert (a.total_lines, a.error_count) == (b.total_lines, b.error_count)
    assert sharded[0].errors[1].startswith("line 16:")


def test_worker_processes_raise_first_strict_error(write_jsonl, monkeypatch):
    path = _numbered_events(write_jsonl, "a.jsonl", 60)
    monkeypatch.setattr(pipeline, "MIN_CHUNK_BYTES", 256)
    with pytest.raises(EventParseError) as excinfo:
        load_events(RunConfig(inputs=[path], threads=3, strict=True))
    assert excinfo.value.line_no == 5
    assert str(path) in excinfo.value.message
