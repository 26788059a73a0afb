"""Subcommand registration. Each module adds its parsers; option dests are RunConfig field names."""

from __future__ import annotations

from typing import Any

from . import analysis, ingest, patterns, run_all, simulate

MODULES = (ingest, analysis, patterns, simulate, run_all)


def register_subcommands(subparsers: Any) -> None:
    for module in MODULES:
        module.register(subparsers)
