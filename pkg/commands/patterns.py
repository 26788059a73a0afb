"""patterns / classify subcommands."""

from __future__ import annotations

from typing import Any

from .options import (
    add_activity_options,
    add_classify_options,
    add_common_arguments,
    add_ingest_options,
    add_pattern_options,
)


def register(subparsers: Any) -> None:
    patterns = subparsers.add_parser(
        "patterns",
        help="lifespan-stage vectors, NMF and pattern labels for departed users",
    )
    add_common_arguments(patterns)
    add_ingest_options(patterns)
    add_activity_options(patterns)
    add_pattern_options(patterns)
    patterns.set_defaults(step="patterns")

    classify = subparsers.add_parser(
        "classify",
        help="predict the pattern label from TF-IDF weighted community visits",
        description="Needs --labels (labels.csv from a patterns run).",
    )
    add_common_arguments(classify)
    add_ingest_options(classify)
    add_classify_options(classify)
    classify.set_defaults(step="classify")
