"""Shared argparse option groups."""

from __future__ import annotations

import argparse
from typing import Any, Dict

from config import RunConfig


def flag(parser: argparse.ArgumentParser, name: str, **kwargs: Any) -> None:
    """A store-true flag that stays None when absent so it does not mask the config file."""
    parser.add_argument(name, action="store_const", const=True, default=None, **kwargs)


def add_common_arguments(parser: argparse.ArgumentParser, *, with_inputs: bool = True) -> None:
    if with_inputs:
        parser.add_argument("inputs", nargs="*", help="line-oriented JSON inputs (raw events or trajectories)")
    parser.add_argument("-o", "--out", dest="output_dir", default=None, help="output directory (default: out)")
    parser.add_argument("--config", dest="config_file", default=None, help="flat key=value config file")
    parser.add_argument("--threads", type=int, default=None, help="worker processes for parsing input files (1 = single process)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--log-level", dest="log_level", default=None)
    flag(parser, "--reference-overlays", dest="reference_overlays", help="also write the physical-space reference CSVs")


def add_ingest_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("ingest")
    group.add_argument("--field-user", dest="field_user", default=None)
    group.add_argument("--field-community", dest="field_community", default=None)
    group.add_argument("--field-ts", dest="field_ts", default=None)
    flag(group, "--strict", dest="strict", help="abort on the first malformed line")
    group.add_argument("--id-terms", dest="id_terms", default=None, help="comma separated bot terms")
    flag(group, "--case-insensitive-terms", dest="case_insensitive_terms")
    flag(group, "--anchored-terms", dest="anchored_terms", help="terms must end the user id")
    group.add_argument("--frequency-threshold", dest="frequency_threshold", type=int, default=None)
    group.add_argument("--inception-ts", dest="inception_ts", type=int, default=None)
    group.add_argument("--end-of-data-ts", dest="end_of_data_ts", type=int, default=None)
    group.add_argument("--start-ts", dest="start_ts", type=int, default=None, help="time slice start (inclusive)")
    group.add_argument("--end-ts", dest="end_ts", type=int, default=None, help="time slice end (exclusive)")


def add_dist_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("dist")
    group.add_argument("--ccdf-fit-min", dest="ccdf_fit_min", type=float, default=None)
    group.add_argument("--ccdf-fit-max", dest="ccdf_fit_max", type=float, default=None)


def add_explore_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("explore")
    group.add_argument("--horizon-hours", dest="horizon_hours", type=int, default=None)
    group.add_argument("--mu-fit-min", dest="mu_fit_min", type=float, default=None)
    group.add_argument("--mu-fit-max", dest="mu_fit_max", type=float, default=None)


def add_zipf_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("zipf")
    group.add_argument("--s-values", dest="s_values", default=None, help="comma separated S list")
    group.add_argument("--zipf-max-distinct", dest="zipf_max_distinct", type=int, default=None)
    group.add_argument("--zeta-fit-min", dest="zeta_fit_min", type=float, default=None)
    group.add_argument("--zeta-fit-max", dest="zeta_fit_max", type=float, default=None)


def add_temporal_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("temporal")
    group.add_argument("--max-hours", dest="max_hours", type=int, default=None)
    group.add_argument("--tz-map", dest="tz_map", default=None, help="community<TAB>zone file")
    group.add_argument("--communities", dest="communities", default=None, help="comma separated whitelist")


def add_activity_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("active users")
    group.add_argument("--min-distinct", dest="min_distinct", type=int, default=None)
    group.add_argument("--min-visits", dest="min_visits", type=int, default=None)


def add_pattern_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("patterns")
    group.add_argument("--cutoff-ts", dest="cutoff_ts", type=int, default=None)
    group.add_argument("--num-stages", dest="num_stages", type=int, default=None)
    group.add_argument("--k", dest="k", type=int, default=None)
    group.add_argument("--scaling-mode", dest="scaling_mode", choices=["raw", "per-feature-max"], default=None)
    group.add_argument("--nmf-max-iter", dest="nmf_max_iter", type=int, default=None)
    group.add_argument("--nmf-tol", dest="nmf_tol", type=float, default=None)


def add_classify_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("classify")
    group.add_argument("--labels", dest="labels_path", default=None, help="labels.csv from a patterns run")
    group.add_argument("--min-users", dest="min_users", type=int, default=None)
    group.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    flag(group, "--stratify", dest="stratify")
    group.add_argument("--l2-strength", dest="l2_strength", type=float, default=None)
    group.add_argument("--lr-max-iter", dest="lr_max_iter", type=int, default=None)
    group.add_argument("--top-n", dest="top_n", type=int, default=None)


def config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Flag values that were actually given, keyed by RunConfig field."""
    fields = RunConfig.model_fields
    return {
        key: value
        for key, value in vars(args).items()
        if key in fields and value is not None and value != []
    }
