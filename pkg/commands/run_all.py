"""all subcommand: one input read, every analysis."""

from __future__ import annotations

from typing import Any

from .options import (
    add_activity_options,
    add_classify_options,
    add_common_arguments,
    add_dist_options,
    add_explore_options,
    add_ingest_options,
    add_pattern_options,
    add_temporal_options,
    add_zipf_options,
)


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser(
        "all",
        help="trajectories, every analysis, patterns and classify in one run",
    )
    add_common_arguments(parser)
    for add_options in (
        add_ingest_options,
        add_dist_options,
        add_explore_options,
        add_zipf_options,
        add_temporal_options,
        add_activity_options,
        add_pattern_options,
        add_classify_options,
    ):
        add_options(parser)
    parser.set_defaults(step="all")
