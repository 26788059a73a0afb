"""Reference data loader for app.mobility (time zones, physical-space constants, frozen generator parameters)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.mobility.temporal import TimezoneMap, load_timezone_map


@dataclass
class ReferenceLoader:
    base_dir: Path

    def _read_json(self, name: str) -> Dict[str, Any]:
        path = self.base_dir / "reference" / name
        data = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError(f"{name} must be a JSON object")
        return data

    def timezone_map(self, path: Optional[Path] = None) -> TimezoneMap:
        path = path or self.base_dir / "reference" / "timezones.tsv"
        with open(path, encoding="utf-8") as f:
            return load_timezone_map(f)

    def physical_reference(self) -> Dict[str, Any]:
        return self._read_json("physical_reference.json")

    def physical_constants(self) -> List[Dict[str, Any]]:
        data = self.physical_reference().get("constants")
        if not isinstance(data, list):
            raise ValueError("physical_reference.json: 'constants' must be a list")
        return data

    def acceptance(self) -> Dict[str, Any]:
        return self._read_json("acceptance.json")


@lru_cache(maxsize=1)
def get_reference_loader(base_dir: Optional[Path] = None) -> ReferenceLoader:
    if base_dir is None:
        base_dir = Path(__file__).resolve().parent
    return ReferenceLoader(base_dir=base_dir)
