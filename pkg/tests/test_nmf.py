from __future__ import annotations

import numpy as np
import pytest

from app.mobility.nmf import nmf_factorize


def _low_rank(n_rows, n_cols, rank, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.1, 1.0, size=(n_rows, rank)) @ rng.uniform(0.1, 1.0, size=(rank, n_cols))


def test_rank_one_is_recovered_exactly():
    X = np.outer(np.arange(1, 7, dtype=float), np.arange(1, 5, dtype=float))
    model = nmf_factorize(X, k=1, max_iter=50, tol=0.0, seed=0)
    assert model.relative_error(X) < 1e-6
    assert model.k == 1


def test_rank_three_product_reconstructs():
    X = _low_rank(60, 15, 3, seed=1)
    model = nmf_factorize(X, k=3, max_iter=3000, tol=1e-9, seed=0)
    assert model.relative_error(X) < 0.05
    assert np.all(model.W >= 0) and np.all(model.H >= 0)


def test_error_history_is_non_increasing():
    X = np.random.default_rng(2).uniform(size=(40, 12))
    model = nmf_factorize(X, k=3, max_iter=200, tol=0.0, seed=4)
    history = model.error_history
    assert len(history) == model.iterations + 1
    for previous, current in zip(history, history[1:]):
        assert current <= previous + 1e-10
    assert history[-1] == pytest.approx(model.frobenius_error)


def test_same_seed_same_factors():
    X = _low_rank(20, 8, 2, seed=3)
    a = nmf_factorize(X, k=2, max_iter=100, seed=9)
    b = nmf_factorize(X, k=2, max_iter=100, seed=9)
    assert np.array_equal(a.W, b.W) and np.array_equal(a.H, b.H)
    assert a.error_history == b.error_history


def test_stops_early_on_tolerance():
    X = _low_rank(20, 8, 2, seed=3)
    model = nmf_factorize(X, k=2, max_iter=10_000, tol=1e-2, seed=0)
    assert model.converged
    assert model.iterations < 10_000


def test_zero_matrix_converges_immediately():
    model = nmf_factorize(np.zeros((4, 3)), k=2, max_iter=10, seed=0)
    assert model.relative_error(np.zeros((4, 3))) == 0.0


def test_input_validation():
    X = np.ones((3, 4))
    X[1, 2] = -0.5
    with pytest.raises(ValueError, match="row 1, column 2"):
        nmf_factorize(X)
    with pytest.raises(ValueError, match="non-finite"):
        nmf_factorize(np.array([[1.0, np.nan]]), k=1)
    with pytest.raises(ValueError, match="2-d"):
        nmf_factorize(np.ones(3), k=1)
    with pytest.raises(ValueError):
        nmf_factorize(np.ones((2, 2)), k=0)
    with pytest.raises(ValueError):
        nmf_factorize(np.ones((2, 2)), k=1, max_iter=0)
