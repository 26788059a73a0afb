"""clean / trajectories subcommands."""

from __future__ import annotations

from typing import Any

from .options import add_common_arguments, add_ingest_options


def register(subparsers: Any) -> None:
    clean = subparsers.add_parser(
        "clean",
        help="parse raw events, drop bots and out-of-range timestamps",
        description="Writes cleaning_report.json, high_frequency_candidates.csv and clean_events.jsonl.",
    )
    add_common_arguments(clean)
    add_ingest_options(clean)
    clean.set_defaults(step="clean")

    trajectories = subparsers.add_parser(
        "trajectories",
        help="build per-user trajectories from raw events",
        description="Writes trajectories.jsonl and cleaning_report.json.",
    )
    add_common_arguments(trajectories)
    add_ingest_options(trajectories)
    trajectories.set_defaults(step="trajectories")
