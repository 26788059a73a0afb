from __future__ import annotations

"""mobility のパイプライン（サブコマンドごとの入口）

各 `run_*` は RunConfig を受け取り、出力ファイル名 → 内容（文字列）の dict を持つ
`StepResult` を返します。ファイルへの書き出しは `write_artifacts` にまとめ、
各ステップはファイルシステムに触れません（manifest の記録は呼び出し側）。

入力の扱い:
- 1 行目に "visits" キーを持つファイルは trajectory 形式、それ以外は生イベントとして読む
- 生イベントは `[deleted]` / bot 語の除去と期間の切り出しを経て trajectory にする
- 生イベントの読み込みは各ファイルを行境界で分割し `threads` 個のプロセスで並列化（結果はファイル順）
"""

import csv
import json
import logging
import time
from collections import OrderedDict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from app.mobility import distributions, nmf, patterns, preference, randomness, randomwalk, synth, temporal
from app.mobility.event import Event, FieldMapping, Trajectory
from app.mobility.export_service import MobilityExportService
from app.mobility.ingest import (
    CleaningReport,
    EventParseError,
    FileChunk,
    ParseResult,
    build_trajectories_from_shards,
    clean_events,
    dump_events,
    dump_trajectories,
    iter_chunk_lines,
    load_trajectories,
    parse_events,
    plan_chunks,
)
from app.mobility.reference_loader import get_reference_loader
from config import RunConfig

logger = logging.getLogger(__name__)

STEPS = ("clean", "trajectories", "dist", "explore", "zipf", "temporal", "randomness", "patterns", "classify", "simulate", "all")


@dataclass
class StepResult:
    """各エントリポイントで共通に返す結果オブジェクト。"""

    step: str
    artifacts: Dict[str, str] = field(default_factory=dict)
    row_counts: Dict[str, int] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, float] = field(default_factory=dict)
    step_rows: Dict[str, Dict[str, int]] = field(default_factory=dict)

    def add(self, name: str, text: str) -> None:
        self.artifacts[name] = text
        lines = text.count("\n")
        if name.endswith(".csv"):
            self.row_counts[name] = max(0, lines - 1)
        elif name.endswith(".jsonl"):
            self.row_counts[name] = lines
        else:
            self.row_counts[name] = 1

    def warn(self, message: str) -> None:
        logger.warning(message)
        self.warnings.append(message)

    def merge(self, other: "StepResult") -> None:
        for name, text in other.artifacts.items():
            self.add(name, text)
        self.warnings.extend(other.warnings)
        self.summary[other.step] = other.summary
        self.step_rows[other.step] = dict(other.row_counts)


@dataclass
class PreparedInput:
    trajectories: "OrderedDict[str, Trajectory]"
    events: Optional[List[Event]] = None
    report: Optional[CleaningReport] = None
    parse_errors: List[str] = field(default_factory=list)


_export = MobilityExportService()


# --- 入力 -------------------------------------------------------------------


# Files smaller than this are parsed as a single chunk.
MIN_CHUNK_BYTES = 1 << 20


@dataclass(frozen=True)
class ParseJob:
    chunk: FileChunk
    mapping: FieldMapping
    strict: bool = False
    inception_ts: Optional[int] = None
    end_ts: Optional[int] = None


def _parse_chunk(job: ParseJob) -> ParseResult:
    path = job.chunk.path
    with open(path, "rb") as f:
        try:
            return parse_events(
                iter_chunk_lines(f, job.chunk.start, job.chunk.end),
                job.mapping,
                strict=job.strict,
                inception_ts=job.inception_ts,
                end_ts=job.end_ts,
                first_line_no=job.chunk.first_line_no,
            )
        except EventParseError as e:
            raise EventParseError(e.line_no, f"{path}: {e.message}") from e


def _load_trajectory_file(path: Path) -> "OrderedDict[str, Trajectory]":
    with open(path, "rb") as f:
        return load_trajectories(f)


def _map_jobs(fn: Callable[[Any], Any], jobs: Sequence[Any], workers: int) -> List[Any]:
    """Run ``fn`` over ``jobs`` in worker processes; results come back in job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def is_trajectory_file(path: Path) -> bool:
    with open(path, "rb") as f:
        for raw in f:
            text = raw.strip()
            if not text:
                continue
            try:
                record = json.loads(text)
            except ValueError:
                return False
            return isinstance(record, dict) and "visits" in record
    return False


def _field_mapping(config: RunConfig) -> FieldMapping:
    return FieldMapping(user=config.field_user, community=config.field_community, ts=config.field_ts)


def load_events(config: RunConfig) -> List[ParseResult]:
    """Parse every input file; one ParseResult per file, in file order.

    With ``threads > 1`` each file is split into line-aligned chunks that are
    parsed in worker processes and merged back in file order, so events,
    error messages and line numbers match a single-process run.
    """
    mapping = _field_mapping(config)
    jobs: List[ParseJob] = []
    owners: List[int] = []
    for index, path in enumerate(config.inputs):
        n_chunks = config.threads if config.threads > 1 else 1
        for chunk in plan_chunks(Path(path), n_chunks, min_chunk_bytes=MIN_CHUNK_BYTES):
            jobs.append(
                ParseJob(
                    chunk=chunk,
                    mapping=mapping,
                    strict=config.strict,
                    inception_ts=config.inception_ts,
                    end_ts=config.end_of_data_ts,
                )
            )
            owners.append(index)
    logger.info("Parsing %d file(s) as %d chunk(s) with %d worker(s)", len(config.inputs), len(jobs), config.threads)

    parts: List[List[ParseResult]] = [[] for _ in config.inputs]
    for owner, result in zip(owners, _map_jobs(_parse_chunk, jobs, config.threads)):
        parts[owner].append(result)
    return [ParseResult.merge(p) for p in parts]


def _merge_trajectory_files(files: Sequence["OrderedDict[str, Trajectory]"]) -> "OrderedDict[str, Trajectory]":
    visits: Dict[str, List[Tuple[str, int]]] = {}
    for trajectories in files:
        for user_id, traj in trajectories.items():
            visits.setdefault(user_id, []).extend(traj.visits)
    return OrderedDict(
        (user_id, Trajectory(user_id=user_id, visits=sorted(visits[user_id], key=lambda v: v[1])))
        for user_id in sorted(visits)
    )


def _slice_trajectories(
    trajectories: "OrderedDict[str, Trajectory]", start_ts: int, end_ts: int
) -> "OrderedDict[str, Trajectory]":
    out: "OrderedDict[str, Trajectory]" = OrderedDict()
    for user_id, traj in trajectories.items():
        kept = [v for v in traj.visits if start_ts <= v[1] < end_ts]
        if kept:
            out[user_id] = Trajectory(user_id=user_id, visits=kept)
    return out


def prepare_input(config: RunConfig) -> PreparedInput:
    """Read the inputs and return cleaned trajectories (and events when the input was raw)."""
    if not config.inputs:
        raise ValueError("no input files given")
    kinds = {is_trajectory_file(p) for p in config.inputs}
    if len(kinds) > 1:
        raise ValueError("inputs mix raw events and trajectories")

    if kinds == {True}:
        files = _map_jobs(_load_trajectory_file, [Path(p) for p in config.inputs], config.threads)
        trajectories = _merge_trajectory_files(files)
        if config.start_ts is not None:
            trajectories = _slice_trajectories(trajectories, config.start_ts, config.end_ts)
        prepared = PreparedInput(trajectories=trajectories)
    else:
        shards = load_events(config)
        events = [e for shard in shards for e in shard.events]
        malformed = sum(s.error_count for s in shards)
        survivors, report = clean_events(
            events,
            id_terms=config.id_terms,
            case_sensitive=not config.case_insensitive_terms,
            anchored=config.anchored_terms,
            frequency_threshold=config.frequency_threshold,
            malformed_lines=malformed,
            start_ts=config.start_ts,
            end_ts=config.end_ts,
        )
        prepared = PreparedInput(
            trajectories=build_trajectories_from_shards([survivors]),
            events=survivors,
            report=report,
            parse_errors=[err for s in shards for err in s.errors][:20],
        )

    if not prepared.trajectories:
        raise ValueError("no events left after parsing and cleaning")
    logger.info(
        "Prepared %d trajectories (%d visits)",
        len(prepared.trajectories),
        sum(len(t) for t in prepared.trajectories.values()),
    )
    return prepared


def _events_of(prepared: PreparedInput, communities: Optional[set] = None) -> List[Event]:
    if prepared.events is not None:
        return prepared.events
    return [
        Event(user_id=traj.user_id, community_id=c, ts=ts)
        for traj in prepared.trajectories.values()
        for c, ts in traj.visits
        if communities is None or c in communities
    ]


def _cleaning_payload(prepared: PreparedInput) -> Dict[str, Any]:
    payload = prepared.report.to_dict() if prepared.report else {}
    payload["parse_errors"] = prepared.parse_errors
    payload["trajectories"] = len(prepared.trajectories)
    return payload


def _fit_payload(fit: Optional[distributions.PowerLawFit]) -> Optional[Dict[str, Any]]:
    if fit is None:
        return None
    return {
        "exponent": fit.exponent,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
        "stderr": fit.stderr,
        "fit_range": list(fit.fit_range),
        "n_points": fit.n_points,
    }


def _try_fit(result: StepResult, label: str, fn: Callable[[], distributions.PowerLawFit]):
    try:
        return fn()
    except ValueError as e:
        result.warn(f"{label}: {e}")
        return None


# --- ステップ -------------------------------------------------------------


def run_clean(config: RunConfig) -> StepResult:
    if any(is_trajectory_file(p) for p in config.inputs):
        raise ValueError("clean expects raw event logs, not trajectories")
    result = StepResult(step="clean")
    prepared = prepare_input(config)
    result.add("cleaning_report.json", _export.generate_json(_cleaning_payload(prepared)))
    result.add("high_frequency_candidates.csv", _export.candidates_csv(prepared.report.flagged_candidates))
    result.add(
        "clean_events.jsonl",
        dump_events((e.user_id, e.community_id, e.ts) for e in prepared.events),
    )
    result.summary = {"surviving_events": len(prepared.events), "users": len(prepared.trajectories)}
    return result


def run_trajectories(config: RunConfig, prepared: Optional[PreparedInput] = None) -> StepResult:
    result = StepResult(step="trajectories")
    prepared = prepared or prepare_input(config)
    result.add("trajectories.jsonl", dump_trajectories(prepared.trajectories))
    if prepared.report is not None:
        result.add("cleaning_report.json", _export.generate_json(_cleaning_payload(prepared)))
    result.summary = {"users": len(prepared.trajectories)}
    return result


def run_dist(config: RunConfig, prepared: Optional[PreparedInput] = None) -> StepResult:
    result = StepResult(step="dist")
    prepared = prepared or prepare_input(config)
    fit_range = (config.ccdf_fit_min, config.ccdf_fit_max)
    fits = {}
    for name, histogram in (
        ("community", distributions.community_visit_counts(prepared.trajectories)),
        ("user", distributions.user_visit_counts(prepared.trajectories)),
    ):
        curve = distributions.ccdf(histogram)
        result.add(f"{name}_ccdf.csv", _export.ccdf_csv(curve.points))
        fit = _try_fit(result, f"{name} CCDF fit", lambda: distributions.fit_loglog(curve.points, fit_range))
        result.add(f"{name}_fit.csv", _export.fit_csv(fit))
        fits[name] = {"keys": len(histogram), "total": histogram.total, "fit": _fit_payload(fit)}
    result.add("dist_fits.json", _export.generate_json(fits))
    result.summary = {name: f["fit"]["exponent"] if f["fit"] else None for name, f in fits.items()}
    return result


def run_explore(config: RunConfig, prepared: Optional[PreparedInput] = None) -> StepResult:
    result = StepResult(step="explore")
    prepared = prepared or prepare_input(config)
    curve = randomwalk.exploration_curve(prepared.trajectories, config.horizon_hours)
    result.add("exploration.csv", _export.exploration_csv(curve.points))
    fit = _try_fit(result, "mu fit", lambda: randomwalk.fit_mu(curve, (config.mu_fit_min, config.mu_fit_max)))
    result.add("mu_fit.csv", _export.fit_csv(fit))
    payload = {
        "mu": fit.exponent if fit else None,
        "n_users": curve.n_users,
        "horizon_hours": config.horizon_hours,
        "fit": _fit_payload(fit),
    }
    result.add("mu_fit.json", _export.generate_json(payload))
    result.summary = {"mu": payload["mu"], "n_users": curve.n_users}
    return result


def run_zipf(config: RunConfig, prepared: Optional[PreparedInput] = None) -> StepResult:
    result = StepResult(step="zipf")
    prepared = prepared or prepare_input(config)
    fits: Dict[str, Any] = {}
    for S in config.s_values:
        try:
            curve = randomwalk.zipf_curve(prepared.trajectories, S, max_distinct=config.zipf_max_distinct)
        except ValueError as e:
            result.warn(f"S={S}: {e}")
            continue
        result.add(f"zipf_S{S}.csv", _export.zipf_csv(curve.points))
        fit = _try_fit(
            result,
            f"zeta fit for S={S}",
            lambda: randomwalk.fit_zeta(curve, (config.zeta_fit_min, config.zeta_fit_max)),
        )
        result.add(f"zeta_fit_S{S}.csv", _export.fit_csv(fit))
        fits[str(S)] = {"zeta": fit.exponent if fit else None, "n_users": curve.n_users, "fit": _fit_payload(fit)}
    if not fits:
        raise ValueError(f"no users for any S in {config.s_values}")
    result.add("zeta_fits.json", _export.generate_json(fits))
    result.summary = {S: f["zeta"] for S, f in fits.items()}
    return result


def run_temporal(config: RunConfig, prepared: Optional[PreparedInput] = None) -> StepResult:
    result = StepResult(step="temporal")
    prepared = prepared or prepare_input(config)

    histogram = temporal.return_probability(prepared.trajectories, config.max_hours)
    result.add("return_probability.csv", _export.return_probability_csv(histogram.bins))

    loader = get_reference_loader()
    tz_map = loader.timezone_map(config.tz_map)
    whitelist = config.communities if config.communities is not None else sorted(tz_map.entries)
    profile = temporal.hourly_profile(_events_of(prepared, set(whitelist)), tz_map, whitelist)
    if profile.weekday_posts + profile.weekend_posts == 0:
        result.warn("no posts in time-zone mapped communities; hourly profile is all zero")
    result.add("hourly_profile.csv", _export.hourly_profile_csv(profile.weekday, profile.weekend))

    summary = {
        "n_gaps": histogram.n_gaps,
        "overflow": histogram.overflow,
        "max_hours": histogram.max_hours,
        "local_maxima": temporal.local_maxima(histogram)[:30],
        "daily_peaks": temporal.has_periodic_peaks(histogram),
        "weekday_posts": profile.weekday_posts,
        "weekend_posts": profile.weekend_posts,
        "communities": whitelist,
    }
    result.add("temporal_summary.json", _export.generate_json(summary))
    result.summary = {"n_gaps": histogram.n_gaps, "daily_peaks": summary["daily_peaks"]}
    return result


def run_randomness(config: RunConfig, prepared: Optional[PreparedInput] = None) -> StepResult:
    result = StepResult(step="randomness")
    prepared = prepared or prepare_input(config)
    active = randomness.active_filter(prepared.trajectories, config.min_distinct, config.min_visits)
    if not active:
        raise ValueError(
            f"no active users (distinct > {config.min_distinct} and visits > {config.min_visits})"
        )
    users = [randomness.user_randomness(traj) for traj in active]
    dist = randomness.randomness_distribution(users)
    result.add("user_randomness.csv", _export.randomness_csv(users))
    result.add("entropy_ccdf.csv", _export.ccdf_csv(dist.entropy_ccdf))
    result.add("max_frq_ccdf.csv", _export.ccdf_csv(dist.max_frq_ccdf))
    summary = {
        "n_users": dist.n_users,
        "fractions": dist.fractions,
        "means": dist.means,
        "medians": dist.medians,
        "min_distinct": config.min_distinct,
        "min_visits": config.min_visits,
    }
    result.add("randomness_summary.json", _export.generate_json(summary))
    result.summary = {"n_users": dist.n_users}
    return result


def _pattern_analysis(
    config: RunConfig, prepared: PreparedInput
) -> Tuple[StepResult, Optional[Dict[str, patterns.PatternLabel]]]:
    result = StepResult(step="patterns")
    if config.cutoff_ts is not None:
        selected = patterns.select_departed_users(
            prepared.trajectories, config.cutoff_ts, config.min_distinct, config.min_visits
        )
    else:
        selected = randomness.active_filter(prepared.trajectories, config.min_distinct, config.min_visits)

    metrics = []
    for traj in selected:
        if len(traj) < config.num_stages:
            result.warn(f"user {traj.user_id!r} has fewer visits than stages; skipped")
            continue
        metrics.append(patterns.user_stage_metrics(traj, config.num_stages))
    if len(metrics) < config.k:
        raise ValueError(f"need at least k={config.k} selected users, got {len(metrics)}")

    matrix = patterns.build_matrix(metrics, config.scaling_mode, k=config.k)
    model = nmf.nmf_factorize(matrix.values, config.k, config.nmf_max_iter, config.nmf_tol, config.seed)
    if not model.converged:
        result.warn(f"NMF stopped at max_iter={config.nmf_max_iter} before reaching tol={config.nmf_tol}")

    rows = (
        {"user": user, **dict(zip(matrix.columns, map(float, row)))}
        for user, row in zip(matrix.user_ids, matrix.values)
    )
    result.add("mobility_vectors.csv", _export.generate_csv(["user"] + matrix.columns, rows))
    result.add("W.csv", _export.weights_csv(matrix.user_ids, model.W))
    result.add("H.csv", _export.components_csv(matrix.columns, model.H))
    result.add("nmf_error_history.csv", _export.error_history_csv(model.error_history))

    assigned: Optional[Dict[str, patterns.PatternLabel]] = None
    components: List[Dict[str, Any]] = []
    if config.k == 3:
        component_labels = patterns.label_components(model.H)
        assigned = patterns.assign_patterns(model.W, component_labels, matrix.user_ids)
        result.add("labels.csv", _export.labels_csv(assigned))
        for profile in patterns.describe_components(model.H):
            components.append(
                {
                    "component": profile.index + 1,
                    "label": component_labels[profile.index].value,
                    "entropy_slope": profile.entropy_slope,
                    "p_new_slope": profile.p_new_slope,
                    "mean_max_frq": profile.mean_max_frq,
                }
            )
    else:
        result.warn(f"automatic pattern labeling needs k=3; W/H written without labels.csv (k={config.k})")

    payload = {
        "users": len(metrics),
        "scaling_mode": config.scaling_mode,
        "num_stages": config.num_stages,
        "nmf": {
            "k": config.k,
            "seed": model.seed,
            "iterations": model.iterations,
            "converged": model.converged,
            "frobenius_error": model.frobenius_error,
            "relative_error": model.relative_error(matrix.values),
        },
        "components": components,
        "population": patterns.pattern_population(assigned) if assigned else None,
    }
    result.add("components.json", _export.generate_json(payload))
    result.summary = {"users": len(metrics), "population": payload["population"]}
    return result, assigned


def run_patterns(config: RunConfig, prepared: Optional[PreparedInput] = None) -> StepResult:
    result, _ = _pattern_analysis(config, prepared or prepare_input(config))
    return result


def read_labels(path: Path) -> Dict[str, str]:
    labels: Dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if not reader.fieldnames or not {"user", "pattern"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected a CSV with 'user' and 'pattern' columns")
        for row in reader:
            labels[row["user"]] = row["pattern"]
    if not labels:
        raise ValueError(f"{path}: no labels")
    return labels


def run_classify(
    config: RunConfig,
    prepared: Optional[PreparedInput] = None,
    labels: Optional[Dict[str, str]] = None,
) -> StepResult:
    result = StepResult(step="classify")
    prepared = prepared or prepare_input(config)
    if labels is None:
        if config.labels_path is not None:
            labels = read_labels(config.labels_path)
        else:
            _, assigned = _pattern_analysis(config, prepared)
            if assigned is None:
                raise ValueError("classify needs pattern labels; pass labels_path or use k=3")
            labels = {user: label.value for user, label in assigned.items()}

    labeled = [prepared.trajectories[u] for u in sorted(labels) if u in prepared.trajectories]
    missing = len(labels) - len(labeled)
    if missing:
        result.warn(f"{missing} labeled users have no trajectory in the input")
    if not labeled:
        raise ValueError("none of the labeled users appear in the input")

    space = preference.build_feature_space(labeled, config.min_users)
    weighted = preference.tfidf_weight(preference.user_community_counts(labeled), space)
    if weighted.dropped_users:
        result.warn(f"{len(weighted.dropped_users)} users without weighted communities were dropped")
    users = weighted.user_ids
    y = [labels[u] for u in users]

    train_users, test_users, split_warnings = preference.split_train_test(
        users, y, config.train_fraction, config.seed, stratify=config.stratify
    )
    result.warnings.extend(split_warnings)
    model = preference.train_classifier(
        weighted.rows_for(train_users),
        [labels[u] for u in train_users],
        space,
        config.l2_strength,
        config.lr_max_iter,
        config.seed,
    )
    if not model.converged:
        result.warn(f"classifier did not converge within {config.lr_max_iter} iterations")
    report = preference.evaluate(model, weighted.rows_for(test_users), [labels[u] for u in test_users])
    result.warnings.extend(report.warnings)

    top = {}
    for label in model.classes:
        positive, negative = preference.top_coefficients(model, label, config.top_n)
        top[label] = {
            "positive": [[c, v, space.user_sizes[c]] for c, v in positive],
            "negative": [[c, v, space.user_sizes[c]] for c, v in negative],
        }

    payload = {
        "metrics": report.to_dict(),
        "tfidf": {
            "formula": weighted.formula,
            "n_documents": weighted.n_documents,
            "n_features": len(space),
            "min_users": config.min_users,
            "dropped_users": weighted.dropped_users,
        },
        "training": {
            "seed": config.seed,
            "train_fraction": config.train_fraction,
            "stratify": config.stratify,
            "n_train": len(train_users),
            "n_test": len(test_users),
            "l2_strength": config.l2_strength,
            "iterations": model.iterations,
            "converged": model.converged,
            "final_loss": model.loss_history[-1],
        },
        "top_coefficients": top,
        "warnings": split_warnings + report.warnings,
    }
    result.add("report.json", _export.generate_json(payload))
    result.add("coefficients.csv", _export.coefficients_csv(preference.coefficient_rows(model)))
    result.summary = {"macro_f1": report.macro["f1"], "accuracy": report.accuracy}
    return result


def run_simulate(config: RunConfig) -> StepResult:
    result = StepResult(step="simulate")
    n_users = config.sim_users
    labels: Optional[Dict[str, patterns.PatternLabel]] = None
    if config.sim_model == "epr":
        params = synth.EprParams(
            rho=config.sim_rho,
            gamma=config.sim_gamma,
            n_steps=config.sim_steps,
            inter_event_seconds=config.sim_inter_event_seconds,
            seed=config.seed,
            arrivals=config.sim_arrivals,
        )
        parameters = params.model_dump()
        trajectories = synth.simulate_epr(params, n_users or 100)
    elif config.sim_model == "zipf":
        parameters = {"S": config.sim_s, "zeta": config.sim_zeta, "visits_per_user": config.sim_visits or 10_000}
        trajectories = synth.simulate_zipf_users(
            config.sim_s, config.sim_zeta, config.sim_visits or 10_000, n_users or 100, config.seed
        )
    elif config.sim_model == "periodic":
        parameters = {
            "period_hours": config.sim_period_hours,
            "jitter_seconds": config.sim_jitter_seconds,
            "n_visits": config.sim_visits or 60,
            "skip_probability": config.sim_skip_probability,
        }
        trajectories = synth.simulate_periodic_returners(
            n_users or 100,
            config.sim_period_hours,
            config.sim_jitter_seconds,
            config.sim_visits or 60,
            config.seed,
            skip_probability=config.sim_skip_probability,
        )
    else:
        specs = synth.default_cohort_specs(n_users=n_users, visits_per_user=config.sim_visits, seed=config.seed)
        parameters = {"cohorts": [spec.model_dump(mode="json") for spec in specs]}
        trajectories, labels = synth.simulate_pattern_cohorts(specs)

    result.add("events.jsonl", synth.events_to_jsonl(trajectories))
    if labels is not None:
        result.add("ground_truth_labels.csv", _export.labels_csv(labels))
    payload = {
        "model": config.sim_model,
        "seed": config.seed,
        "users": len(trajectories),
        "events": sum(len(t) for t in trajectories),
        "parameters": parameters,
    }
    result.add("simulation.json", _export.generate_json(payload))
    result.summary = {"users": payload["users"], "events": payload["events"]}
    return result


def reference_overlays() -> StepResult:
    result = StepResult(step="reference")
    loader = get_reference_loader()
    result.add("reference_physical_constants.csv", _export.physical_constants_csv(loader.physical_constants()))
    markers = loader.physical_reference()["hourly_markers"]
    result.add("reference_hourly_physical.csv", _export.hourly_markers_csv(markers))
    return result


def emit_reference_overlays(output_dir: Path) -> List[Path]:
    """Write the static physical-space reference CSVs next to computed results."""
    return write_artifacts(reference_overlays(), output_dir)


ANALYSES: Tuple[Tuple[str, Callable[[RunConfig, PreparedInput], StepResult]], ...] = (
    ("dist", run_dist),
    ("explore", run_explore),
    ("zipf", run_zipf),
    ("temporal", run_temporal),
    ("randomness", run_randomness),
)


def run_all(config: RunConfig) -> StepResult:
    """trajectories → 各分析 → patterns → classify を 1 回の入力読み込みで実行。

    個々の分析が成立しない入力（例: horizon に届くユーザーがいない）は警告にとどめ、
    入力そのものが空の場合だけ失敗にします。
    """
    result = StepResult(step="all")

    started = time.perf_counter()
    prepared = prepare_input(config)
    result.merge(run_trajectories(config, prepared))
    result.timings["trajectories"] = time.perf_counter() - started

    for name, fn in ANALYSES:
        started = time.perf_counter()
        try:
            result.merge(fn(config, prepared))
        except ValueError as e:
            result.warn(f"{name} skipped: {e}")
        result.timings[name] = time.perf_counter() - started

    started = time.perf_counter()
    try:
        pattern_result, assigned = _pattern_analysis(config, prepared)
        result.merge(pattern_result)
    except ValueError as e:
        result.warn(f"patterns skipped: {e}")
        assigned = None
    result.timings["patterns"] = time.perf_counter() - started

    if assigned is not None:
        started = time.perf_counter()
        try:
            labels = {user: label.value for user, label in assigned.items()}
            result.merge(run_classify(config, prepared, labels))
        except ValueError as e:
            result.warn(f"classify skipped: {e}")
        result.timings["classify"] = time.perf_counter() - started

    result.merge(reference_overlays())
    return result


RUNNERS: Dict[str, Callable[[RunConfig], StepResult]] = {
    "clean": run_clean,
    "trajectories": run_trajectories,
    "dist": run_dist,
    "explore": run_explore,
    "zipf": run_zipf,
    "temporal": run_temporal,
    "randomness": run_randomness,
    "patterns": run_patterns,
    "classify": run_classify,
    "simulate": run_simulate,
    "all": run_all,
}


def run_step(name: str, config: RunConfig) -> StepResult:
    if name not in RUNNERS:
        raise KeyError(f"unknown step {name!r}")
    started = time.perf_counter()
    result = RUNNERS[name](config)
    if name != "all":
        result.step_rows[name] = dict(result.row_counts)
        if config.reference_overlays:
            result.merge(reference_overlays())
    result.timings.setdefault(name, time.perf_counter() - started)
    return result


def write_artifacts(result: StepResult, output_dir: Path) -> List[Path]:
    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for name in sorted(result.artifacts):
        path = output_dir / name
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(result.artifacts[name])
        written.append(path)
    logger.info("Wrote %d files to %s", len(written), output_dir)
    return written
