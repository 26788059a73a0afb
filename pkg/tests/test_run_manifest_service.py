from __future__ import annotations

import hashlib
import json

from app.mobility import __version__
from services.run_manifest_service import MANIFEST_NAME, RunManifestService, file_digest


def test_file_digest_matches_hashlib(tmp_path):
    path = tmp_path / "events.jsonl"
    path.write_bytes(b'{"author":"a"}\n')
    assert file_digest(path) == hashlib.sha256(b'{"author":"a"}\n').hexdigest()


def test_successful_manifest(tmp_path):
    path = tmp_path / "events.jsonl"
    path.write_bytes(b"x\n")
    manifest = RunManifestService(subcommand="dist")
    manifest.start([path], {"seed": 0})
    manifest.record_step("dist", 0.1234567, {"community_ccdf.csv": 3})
    manifest.outputs = ["dist_fits.json", "community_ccdf.csv"]

    written = manifest.write(tmp_path / "out")
    assert written.name == MANIFEST_NAME
    data = json.loads(written.read_text(encoding="utf-8"))
    assert data["tool"] == "cybermobility"
    assert data["version"] == __version__
    assert data["status"] == "ok"
    assert data["error"] is None
    assert data["config"] == {"seed": 0}
    assert data["inputs"] == [{"path": str(path), "sha256": file_digest(path), "bytes": 2}]
    assert data["steps"] == [{"name": "dist", "seconds": 0.123457, "row_counts": {"community_ccdf.csv": 3}}]
    assert data["outputs"] == ["community_ccdf.csv", "dist_fits.json"]


def test_failed_manifest(tmp_path):
    manifest = RunManifestService(subcommand="all")
    manifest.fail("runtime", "no events left after parsing and cleaning")
    data = json.loads(manifest.write(tmp_path).read_text(encoding="utf-8"))
    assert data["status"] == "failed"
    assert data["error"] == {"code": "runtime", "message": "no events left after parsing and cleaning"}
    assert data["inputs"] == []
