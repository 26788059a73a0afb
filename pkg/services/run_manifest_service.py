"""Run manifest: what was run, on which inputs, and what it produced.

Input digests are taken before any processing starts. The manifest is
written on failure too, with ``error`` filled in.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from app.mobility import __version__

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
_CHUNK = 1 << 20


def file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(_CHUNK), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class StepRecord:
    name: str
    seconds: float
    row_counts: Dict[str, int] = field(default_factory=dict)


@dataclass
class RunManifestService:
    subcommand: str
    config_snapshot: Dict[str, Any] = field(default_factory=dict)
    inputs: List[Dict[str, Any]] = field(default_factory=list)
    steps: List[StepRecord] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    error: Optional[Dict[str, str]] = None
    started_at: str = ""

    def start(self, input_paths: Sequence[Path], config_snapshot: Optional[Dict[str, Any]] = None) -> None:
        self.started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        if config_snapshot is not None:
            self.config_snapshot = config_snapshot
        self.inputs = [
            {"path": str(p), "sha256": file_digest(Path(p)), "bytes": Path(p).stat().st_size}
            for p in input_paths
        ]
        logger.info("Run %s started on %d input file(s)", self.subcommand, len(self.inputs))

    def record_step(self, name: str, seconds: float, row_counts: Optional[Dict[str, int]] = None) -> None:
        self.steps.append(StepRecord(name=name, seconds=round(seconds, 6), row_counts=dict(row_counts or {})))

    def fail(self, code: str, message: str) -> None:
        self.error = {"code": code, "message": message}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tool": "cybermobility",
            "version": __version__,
            "subcommand": self.subcommand,
            "started_at": self.started_at,
            "status": "failed" if self.error else "ok",
            "config": self.config_snapshot,
            "inputs": self.inputs,
            "steps": [
                {"name": s.name, "seconds": s.seconds, "row_counts": s.row_counts} for s in self.steps
            ],
            "outputs": sorted(self.outputs),
            "warnings": self.warnings,
            "error": self.error,
        }

    def write(self, output_dir: Path) -> Path:
        output_dir.mkdir(parents=True, exist_ok=True)
        path = output_dir / MANIFEST_NAME
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n")
        return path
