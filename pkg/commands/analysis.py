"""Single-analysis subcommands: dist, explore, zipf, temporal, randomness."""

from __future__ import annotations

from typing import Any

from .options import (
    add_activity_options,
    add_common_arguments,
    add_dist_options,
    add_explore_options,
    add_ingest_options,
    add_temporal_options,
    add_zipf_options,
)

_ANALYSES = (
    ("dist", "visits-per-community and visits-per-user CCDFs with power-law fits", add_dist_options),
    ("explore", "distinct communities S(t) and its growth exponent", add_explore_options),
    ("zipf", "visit frequency by rank for users with exactly S communities", add_zipf_options),
    ("temporal", "first-passage return probability and hourly activity", add_temporal_options),
    ("randomness", "per-user entropy and top-community share", add_activity_options),
)


def register(subparsers: Any) -> None:
    for name, help_text, add_options in _ANALYSES:
        parser = subparsers.add_parser(name, help=help_text)
        add_common_arguments(parser)
        add_ingest_options(parser)
        add_options(parser)
        parser.set_defaults(step=name)
