from __future__ import annotations

import numpy as np
import pytest

from app.mobility.nmf import nmf_factorize
from app.mobility.patterns import (
    PatternLabel,
    StageMetrics,
    assign_patterns,
    build_matrix,
    column_names,
    label_components,
    pattern_population,
    segment_stages,
    select_departed_users,
    stage_metrics,
    user_stage_metrics,
)
from app.mobility.synth import CohortSpec, simulate_pattern_cohorts


def _metrics(user_id, values):
    n = (len(values) + 1) // 3
    return StageMetrics(
        user_id=user_id,
        stage_entropy=values[:n],
        stage_max_frq=values[n: 2 * n],
        p_new=values[2 * n:],
    )


def test_column_names():
    names = column_names(20)
    assert len(names) == 59
    assert names[0] == "ent01" and names[20] == "mf01" and names[40] == "pn02" and names[-1] == "pn20"
    assert column_names(3) == ["ent01", "ent02", "ent03", "mf01", "mf02", "mf03", "pn02", "pn03"]


def test_segment_stages_covers_every_visit(make_trajectory):
    traj = make_trajectory("u", [(f"c{i}", i) for i in range(45)])
    stages = segment_stages(traj, 20)
    assert len(stages) == 20
    assert all(len(s) in (2, 3) for s in stages)
    assert [v for s in stages for v in s] == traj.visits


def test_segment_stages_errors(make_trajectory):
    traj = make_trajectory("u", [("a", i) for i in range(5)])
    with pytest.raises(ValueError, match="fewer than"):
        segment_stages(traj, 20)
    with pytest.raises(ValueError):
        segment_stages(traj, 1)


def test_stage_metrics_new_community_share():
    stages = [[("a", 1), ("a", 2)], [("a", 3), ("b", 4)], [("b", 5), ("c", 6)]]
    metrics = stage_metrics(stages, user_id="u")
    assert metrics.stage_entropy == [0.0, 1.0, 1.0]
    assert metrics.stage_max_frq == [1.0, 0.5, 0.5]
    assert metrics.p_new == [0.5, 0.5]
    assert len(metrics.vector()) == 8


def test_stage_metrics_on_single_community_user(make_trajectory):
    traj = make_trajectory("u", [("home", i) for i in range(40)])
    metrics = user_stage_metrics(traj)
    assert metrics.stage_entropy == [0.0] * 20
    assert metrics.p_new == [0.0] * 19


def test_build_matrix_scaling_and_validation():
    metrics = [
        _metrics("a", [1.0, 2.0, 0.5, 0.5, 0.0]),
        _metrics("b", [2.0, 2.0, 1.0, 0.25, 0.0]),
        _metrics("c", [0.0, 1.0, 0.5, 0.5, 0.0]),
    ]
    raw = build_matrix(metrics)
    assert raw.values.shape == (3, 5)
    assert raw.columns == ["ent01", "ent02", "mf01", "mf02", "pn02"]

    scaled = build_matrix(metrics, "per-feature-max")
    assert scaled.values[:, 0].tolist() == [0.5, 1.0, 0.0]
    assert scaled.values[:, 4].tolist() == [0.0, 0.0, 0.0]
    assert scaled.column_max[0] == 2.0

    with pytest.raises(ValueError, match="scaling_mode"):
        build_matrix(metrics, "zscore")
    with pytest.raises(ValueError, match="k=3"):
        build_matrix(metrics[:2])
    with pytest.raises(ValueError, match="negative"):
        build_matrix(metrics[:2] + [_metrics("d", [-1.0, 0.0, 0.0, 0.0, 0.0])])


def _profile(entropy, max_frq=(0.5, 0.5, 0.5), p_new=(0.1, 0.1)):
    return list(entropy) + list(max_frq) + list(p_new)


def test_label_components_by_entropy_trend():
    H = np.array([
        _profile((0.3, 0.3, 0.31)),
        _profile((0.9, 0.5, 0.1)),
        _profile((0.1, 0.5, 0.9)),
    ])
    labels = label_components(H)
    assert labels == {
        0: PatternLabel.CONCENTRATED,
        1: PatternLabel.EXPLORATORY_II,
        2: PatternLabel.EXPLORATORY_I,
    }


def test_label_components_refuses_ties():
    H = np.array([_profile((0.3, 0.3, 0.3)), _profile((0.5, 0.5, 0.5)), _profile((0.1, 0.5, 0.9))])
    with pytest.raises(ValueError, match="manually"):
        label_components(H)
    with pytest.raises(ValueError, match="exactly 3"):
        label_components(H[:2])


def test_assign_patterns_tie_break_and_errors():
    labels = {0: PatternLabel.CONCENTRATED, 1: PatternLabel.EXPLORATORY_I, 2: PatternLabel.EXPLORATORY_II}
    W = np.array([[1.0, 1.0, 0.0], [0.0, 0.2, 0.9], [0.5, 0.0, 0.0]])
    assigned = assign_patterns(W, labels, ["u1", "u2", "u3"])
    assert assigned == {
        "u1": PatternLabel.EXPLORATORY_I,
        "u2": PatternLabel.EXPLORATORY_II,
        "u3": PatternLabel.CONCENTRATED,
    }
    assert pattern_population(assigned) == {"EXPLORATORY_I": 1, "EXPLORATORY_II": 1, "CONCENTRATED": 1}

    with pytest.raises(ValueError, match="all-zero"):
        assign_patterns(np.zeros((1, 3)), labels, ["u"])
    with pytest.raises(ValueError):
        assign_patterns(W, labels, ["u1"])


def test_label_components_follow_row_permutation():
    H = np.array([
        _profile((0.3, 0.3, 0.31)),
        _profile((0.9, 0.5, 0.1)),
        _profile((0.1, 0.5, 0.9)),
    ])
    labels = label_components(H)
    order = [2, 0, 1]
    permuted = label_components(H[order])
    assert permuted == {new: labels[old] for new, old in enumerate(order)}


def test_assign_patterns_ignores_row_scale():
    labels = {0: PatternLabel.CONCENTRATED, 1: PatternLabel.EXPLORATORY_I, 2: PatternLabel.EXPLORATORY_II}
    W = np.array([[0.2, 0.7, 0.1], [0.0, 0.2, 0.9], [0.5, 0.5, 0.0]])
    users = ["u1", "u2", "u3"]
    scaled = W * np.array([[3.0], [0.01], [250.0]])
    assert assign_patterns(scaled, labels, users) == assign_patterns(W, labels, users)


def test_select_departed_users(make_trajectory):
    def user(name, last_ts):
        return make_trajectory(name, [("a", 0), ("b", 1), ("c", last_ts)])

    trajectories = [user("gone", 50), user("stayed", 500)]
    departed = select_departed_users(trajectories, cutoff_ts=100, min_distinct=2, min_visits=2)
    assert [t.user_id for t in departed] == ["gone"]


def _cohort(pattern, explore_start, explore_end, home_share, pool, pool_size, affinity=0.8):
    return CohortSpec(
        pattern=pattern,
        n_users=40,
        visits_per_user=400,
        explore_start=explore_start,
        explore_end=explore_end,
        home_share=home_share,
        pool=pool,
        pool_size=pool_size,
        pool_affinity=affinity,
        general_pool_size=300,
        seed=5,
    )


def _entropy_slope(metrics):
    mean = np.mean([m.stage_entropy for m in metrics], axis=0)
    return float(np.polyfit(np.arange(len(mean)), mean, 1)[0])


def test_cohort_stage_trends_match_their_pattern():
    specs = [
        _cohort(PatternLabel.EXPLORATORY_I, 0.02, 0.8, 0.7, "general_a", 300),
        _cohort(PatternLabel.EXPLORATORY_II, 0.8, 0.02, 0.9, "general_b", 300),
        _cohort(PatternLabel.CONCENTRATED, 0.01, 0.01, 0.97, "niche", 40, affinity=0.9),
    ]
    trajectories, labels = simulate_pattern_cohorts(specs)
    by_pattern = {}
    for traj in trajectories:
        by_pattern.setdefault(labels[traj.user_id], []).append(user_stage_metrics(traj))

    assert _entropy_slope(by_pattern[PatternLabel.EXPLORATORY_I]) > 0
    assert _entropy_slope(by_pattern[PatternLabel.EXPLORATORY_II]) < 0
    concentrated = np.mean([m.stage_entropy for m in by_pattern[PatternLabel.CONCENTRATED]], axis=0)
    assert concentrated.max() < 0.5
    p_new = np.mean([m.p_new for m in by_pattern[PatternLabel.EXPLORATORY_I]], axis=0)
    assert np.polyfit(np.arange(len(p_new)), p_new, 1)[0] > 0


def test_stage_pipeline_produces_one_label_per_user():
    specs = [
        _cohort(PatternLabel.EXPLORATORY_I, 0.02, 0.8, 0.7, "general_a", 300),
        _cohort(PatternLabel.EXPLORATORY_II, 0.8, 0.02, 0.9, "general_b", 300),
        _cohort(PatternLabel.CONCENTRATED, 0.01, 0.01, 0.97, "niche", 40, affinity=0.9),
    ]
    trajectories, _ = simulate_pattern_cohorts(specs)
    metrics = [user_stage_metrics(t) for t in trajectories]
    matrix = build_matrix(metrics)
    model = nmf_factorize(matrix.values, k=3, max_iter=300, seed=0)
    labels = label_components(model.H)
    assert sorted(labels.values()) == sorted(PatternLabel)
    assigned = assign_patterns(model.W, labels, matrix.user_ids)
    assert set(assigned) == {t.user_id for t in trajectories}
