"""simulate subcommand: synthetic event streams with known parameters."""

from __future__ import annotations

from typing import Any

from .options import add_common_arguments


def register(subparsers: Any) -> None:
    parser = subparsers.add_parser(
        "simulate",
        help="write a synthetic events.jsonl (epr, zipf, periodic or cohorts)",
    )
    add_common_arguments(parser, with_inputs=False)
    group = parser.add_argument_group("model")
    group.add_argument("--model", dest="sim_model", choices=["epr", "zipf", "periodic", "cohorts"], default=None)
    group.add_argument("--users", dest="sim_users", type=int, default=None)
    group.add_argument("--rho", dest="sim_rho", type=float, default=None)
    group.add_argument("--gamma", dest="sim_gamma", type=float, default=None)
    group.add_argument("--steps", dest="sim_steps", type=int, default=None)
    group.add_argument("--inter-event-seconds", dest="sim_inter_event_seconds", type=int, default=None)
    group.add_argument("--arrivals", dest="sim_arrivals", choices=["regular", "poisson"], default=None)
    group.add_argument("--S", dest="sim_s", type=int, default=None)
    group.add_argument("--zeta", dest="sim_zeta", type=float, default=None)
    group.add_argument("--visits", dest="sim_visits", type=int, default=None)
    group.add_argument("--period-hours", dest="sim_period_hours", type=int, default=None)
    group.add_argument("--jitter-seconds", dest="sim_jitter_seconds", type=int, default=None)
    group.add_argument("--skip-probability", dest="sim_skip_probability", type=float, default=None)
    parser.set_defaults(step="simulate")
