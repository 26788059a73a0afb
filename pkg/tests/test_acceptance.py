"""Full-size runs with the frozen parameters in reference/acceptance.json.

Deselected by default; run with ``pytest -m acceptance``.
"""

from __future__ import annotations

import json
import os
import time

import numpy as np
import pytest

from app.mobility import nmf, preference
from app.mobility.patterns import assign_patterns, build_matrix, label_components, user_stage_metrics
from app.mobility.randomwalk import exploration_curve, fit_mu, fit_zeta, zipf_curve
from app.mobility.reference_loader import get_reference_loader
from app.mobility.synth import (
    EprParams,
    default_cohort_specs,
    simulate_epr,
    simulate_pattern_cohorts,
    simulate_zipf_users,
)
from main import EXIT_OK, main

pytestmark = pytest.mark.acceptance


@pytest.fixture(scope="module")
def frozen():
    return get_reference_loader().acceptance()


@pytest.fixture(scope="module")
def cohorts():
    return simulate_pattern_cohorts(default_cohort_specs())


def test_mu_recovery(frozen):
    p = frozen["epr"]
    params = EprParams(
        rho=p["rho"], gamma=p["gamma"], n_steps=p["n_steps"],
        inter_event_seconds=p["inter_event_seconds"], seed=p["seed"],
    )
    curve = exploration_curve(simulate_epr(params, p["n_users"]), p["n_steps"])
    fit = fit_mu(curve, (p["fit_min"], p["n_steps"]))
    assert abs(fit.exponent - p["target_mu"]) <= p["tolerance"]


def test_zeta_recovery(frozen):
    p = frozen["zipf"]
    trajectories = simulate_zipf_users(p["S"], p["zeta"], p["visits_per_user"], p["n_users"], p["seed"])
    fit = fit_zeta(zipf_curve(trajectories, p["S"]), (p["fit_min"], p["fit_max"]))
    assert abs(fit.exponent - p["target_zeta"]) <= p["tolerance"]


def test_nmf_on_large_rank_three_product():
    rng = np.random.default_rng(0)
    X = rng.uniform(0.1, 1.0, size=(5000, 3)) @ rng.uniform(0.1, 1.0, size=(3, 59))
    model = nmf.nmf_factorize(X, k=3, max_iter=500, tol=0.0, seed=0)
    assert model.relative_error(X) < 1e-2
    history = model.error_history
    assert all(b <= a + 1e-10 for a, b in zip(history, history[1:]))
    assert np.all(model.W >= 0) and np.all(model.H >= 0)


def test_pattern_recovery(cohorts):
    trajectories, truth = cohorts
    matrix = build_matrix([user_stage_metrics(t) for t in trajectories])
    model = nmf.nmf_factorize(matrix.values, k=3, max_iter=500, seed=0)
    labels = label_components(model.H)
    assert len(set(labels.values())) == 3
    assigned = assign_patterns(model.W, labels, matrix.user_ids)
    hits = sum(1 for user, label in assigned.items() if truth[user] == label)
    assert hits / len(assigned) >= 0.9


def test_classifier_macro_f1(cohorts):
    trajectories, truth = cohorts
    space = preference.build_feature_space(trajectories, min_users=50)
    weighted = preference.tfidf_weight(preference.user_community_counts(trajectories), space)
    users = weighted.user_ids
    y = [truth[u].value for u in users]
    train, test, _ = preference.split_train_test(users, y, 0.8, seed=0)
    model = preference.train_classifier(weighted.rows_for(train), [truth[u].value for u in train], space, seed=0)
    report = preference.evaluate(model, weighted.rows_for(test), [truth[u].value for u in test])
    assert report.macro["f1"] >= 0.9


THROUGHPUT_EVENTS = 10_000_000
THROUGHPUT_SECONDS = 120.0


def _write_synthetic_log(path, n_events, n_users=5000, n_communities=20000, seed=3):
    rng = np.random.default_rng(seed)
    block = 500_000
    ts = 1451606400
    with open(path, "w", encoding="utf-8") as f:
        for start in range(0, n_events, block):
            size = min(block, n_events - start)
            users = rng.integers(0, n_users, size)
            communities = rng.zipf(1.5, size) % n_communities
            f.writelines(
                f'{{"author":"u{u}","subreddit":"c{c}","created_utc":{ts + start + i}}}\n'
                for i, (u, c) in enumerate(zip(users.tolist(), communities.tolist()))
            )


@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs 4 cores")
def test_clean_to_randomness_throughput(tmp_path, capsys):
    log = tmp_path / "events.jsonl"
    _write_synthetic_log(log, THROUGHPUT_EVENTS)

    started = time.perf_counter()
    code = main(["randomness", str(log), "--threads", "4", "--min-visits", "100", "-o", str(tmp_path / "out")])
    elapsed = time.perf_counter() - started

    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])["summary"]
    assert summary["n_users"] == 5000
    assert elapsed < THROUGHPUT_SECONDS, f"{THROUGHPUT_EVENTS} events took {elapsed:.1f}s"
