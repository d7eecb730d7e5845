import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tailsel.errors import FeatureMismatchError
from tailsel.learners import (
    LearnerConfig,
    TrainedModel,
    logistic_objective,
    predict,
    predict_proba,
    train,
    train_gradient_boosting,
    train_logistic,
    train_random_forest,
)

BOOSTERS = ["gradient_boosting", "gradient_boosting_l2"]


def fd_gradient(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


# ---------------------------------------------------------------- config

def test_config_validation():
    for bad in [dict(kind="svm"), dict(learning_rate=0.0), dict(learning_rate=1.5), dict(depth=0),
                dict(min_leaf=0), dict(trees=-1), dict(l2=-1.0)]:
        with pytest.raises(ValueError):
            LearnerConfig(**bad)


def test_config_defaults_echo():
    rf = LearnerConfig(kind="random_forest").to_dict()
    assert rf["trees"] == 100 and rf["min_leaf"] == 5 and rf["depth"] is None
    gb = LearnerConfig(kind="gradient_boosting").to_dict()
    assert gb["trees"] == 100 and gb["depth"] == 3 and gb["learning_rate"] == 0.1
    assert LearnerConfig(kind="logistic").l2 == 1.0
    assert "threads" not in gb


# ---------------------------------------------------------------- logistic

@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(5, 60), d=st.integers(1, 5), l2=st.floats(0.0, 5.0))
def test_logistic_gradient_finite_differences(seed, n, d, l2):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = (rng.random(n) < 0.4).astype(float)
    params = rng.normal(size=d + 1)
    _, grad = logistic_objective(params, X, y, l2)
    fd = fd_gradient(lambda p: logistic_objective(p, X, y, l2)[0], params)
    denom = np.maximum(np.abs(fd), 1e-3)
    assert np.max(np.abs(grad - fd) / denom) < 1e-5


def test_logistic_gradient_at_solution():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(300, 3))
    y = (X @ [1.0, -2.0, 0.5] + rng.normal(size=300) > 0).astype(int)
    m = train_logistic(X, y)
    params = np.concatenate([[m.intercept], m.coef])
    _, grad = logistic_objective(params, X, y.astype(float), 1.0)
    fd = fd_gradient(lambda p: logistic_objective(p, X, y.astype(float), 1.0)[0], params)
    assert m.meta["converged"]
    assert np.max(np.abs(grad - fd)) < 1e-8


def test_logistic_separable_1d():
    x = np.concatenate([np.linspace(-3, -0.1, 50), np.linspace(0.1, 3, 50)])[:, None]
    y = (x[:, 0] > 0).astype(int)
    m = train_logistic(x, y)
    assert np.mean(predict(m, x) == y) == 1.0


def test_logistic_independent_predicts_prevalence():
    rng = np.random.default_rng(2)
    # large n so coefficient noise times the extreme |x| stays inside the band
    X = rng.normal(size=(50_000, 3))
    y = (rng.random(50_000) < 0.3).astype(int)
    m = train_logistic(X, y)
    p = predict_proba(m, X)
    assert np.max(np.abs(p - y.mean())) < 0.02


def test_logistic_zero_weights_half():
    m = TrainedModel("logistic", ["a", "b"], LearnerConfig(), coef=np.zeros(2), intercept=0.0)
    assert np.all(predict_proba(m, np.ones((4, 2))) == 0.5)


# ---------------------------------------------------------------- random forest

def test_forest_threshold_concept():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 6, size=(2000, 3))
    y = (X[:, 0] > 3).astype(int)
    cfg = LearnerConfig(kind="random_forest", trees=30, seed=1)
    m = train_random_forest(X[:1500], y[:1500], cfg)
    assert np.mean(predict(m, X[1500:]) == y[1500:]) >= 0.95


def test_forest_vote_fractions_and_determinism():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(400, 4))
    y = (X[:, 0] + X[:, 1] + rng.normal(size=400) > 0).astype(int)
    cfg = LearnerConfig(kind="random_forest", trees=7, seed=5)
    p = predict_proba(train_random_forest(X, y, cfg), X)
    np.testing.assert_allclose(p * 7, np.round(p * 7), atol=1e-12)
    p2 = predict_proba(train_random_forest(X, y, cfg), X)
    assert np.array_equal(p, p2)
    one = predict_proba(train_random_forest(X, y, LearnerConfig(kind="random_forest", trees=1)), X)
    assert set(np.unique(one)) <= {0.0, 1.0}


def test_forest_threads_identical():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(500, 5))
    y = (X[:, 2] > 0.3).astype(int)
    a = train_random_forest(X, y, LearnerConfig(kind="random_forest", trees=8, seed=2, threads=1))
    b = train_random_forest(X, y, LearnerConfig(kind="random_forest", trees=8, seed=2, threads=4))
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())


def test_forest_oob_close_to_holdout():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(6000, 5))
    y = (X[:, 0] - X[:, 1] + 0.8 * rng.normal(size=6000) > 0).astype(int)
    cfg = LearnerConfig(kind="random_forest", trees=40, seed=3)
    m = train_random_forest(X[:5000], y[:5000], cfg, oob=True)
    held = np.mean(predict(m, X[5000:]) == y[5000:])
    assert abs(m.meta["oob_accuracy"] - held) <= 0.05


def test_forest_zero_trees():
    m = train_random_forest(np.arange(10.0)[:, None], np.arange(10) % 2, LearnerConfig(kind="random_forest", trees=0))
    assert np.all(predict_proba(m, np.zeros((3, 1))) == 0.5)


# ---------------------------------------------------------------- boosting

@pytest.mark.parametrize("kind", BOOSTERS)
def test_boosting_xor(kind):
    rng = np.random.default_rng(8)
    X = rng.integers(0, 2, size=(400, 2)).astype(float)
    y = (X[:, 0] != X[:, 1]).astype(int)
    m = train_gradient_boosting(X, y, LearnerConfig(kind=kind, depth=3, trees=100))
    assert np.mean(predict(m, X) == y) >= 0.99


@pytest.mark.parametrize("kind", BOOSTERS)
def test_boosting_zero_trees_base_rate(kind):
    y = np.array([0, 0, 0, 1])
    m = train_gradient_boosting(np.arange(4.0)[:, None], y, LearnerConfig(kind=kind, trees=0))
    np.testing.assert_allclose(predict_proba(m, np.zeros((3, 1))), 0.25)


@pytest.mark.parametrize("kind", BOOSTERS)
def test_boosting_loss_monotone_random_datasets(kind):
    for seed in range(20):
        rng = np.random.default_rng(100 + seed)
        n, d = int(rng.integers(30, 300)), int(rng.integers(1, 6))
        X = rng.normal(size=(n, d))
        if rng.random() < 0.5:
            X = np.round(X)
        y = (rng.random(n) < rng.uniform(0.1, 0.9)).astype(int)
        if y.min() == y.max():
            y[0] = 1 - y[0]
        cfg = LearnerConfig(kind=kind, trees=25, learning_rate=float(rng.uniform(0.05, 1.0)), seed=seed)
        losses = np.array(train_gradient_boosting(X, y, cfg).meta["loss_history"])
        assert np.all(np.diff(losses) <= 1e-12), (seed, np.diff(losses).max())


# ---------------------------------------------------------------- contracts

@pytest.mark.parametrize("kind", ["logistic", "random_forest", "gradient_boosting", "gradient_boosting_l2"])
def test_predict_thresholds_proba_and_serializes(kind):
    rng = np.random.default_rng(9)
    X = rng.normal(size=(200, 3))
    y = (X[:, 0] > 0).astype(int)
    m = train(LearnerConfig(kind=kind, trees=10, seed=1), X, y, ["a", "b", "c"])
    p = predict_proba(m, X)
    assert np.all((p >= 0) & (p <= 1))
    assert np.array_equal(predict(m, X), (p >= 0.5).astype(int))
    doc = json.loads(json.dumps(m.to_dict()))
    assert doc["schema_version"] == 1 and doc["kind"] == kind
    back = TrainedModel.from_dict(doc)
    assert np.array_equal(predict_proba(back, X), p)


def test_feature_mismatch():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(50, 2))
    m = train_logistic(X, (X[:, 0] > 0).astype(int), feature_names=["a", "b"])
    with pytest.raises(FeatureMismatchError):
        predict_proba(m, X[:, :1])
    with pytest.raises(FeatureMismatchError):
        predict_proba(m, pd.DataFrame(X, columns=["b", "a"]))
    assert predict_proba(m, pd.DataFrame(X, columns=["a", "b"])).shape == (50,)
