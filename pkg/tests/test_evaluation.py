import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kstest

from oracles import brute_auc
from vocalrqa.data import CohortFeatureTable
from vocalrqa.evaluation import (
    ConfigError,
    CVConfig,
    auc_roc,
    bootstrap_ci,
    permutation_p_value,
    permutation_test,
    rank_channels,
    run_cv,
    stratified_folds,
)
from vocalrqa.pipeline import PipelineConfig, fit_pipeline, score_pipeline


def _table(X, y, names=None):
    X = np.asarray(X, dtype=float)
    ids = tuple(f"P{i:04d}" for i in range(len(y)))
    return CohortFeatureTable(ids, np.asarray(y), X, tuple(names or (f"f{j}" for j in range(X.shape[1]))))


def _effect_table(rng, n0=60, n1=40, k=30, n_signal=3, shift=1.5):
    y = np.r_[np.zeros(n0, int), np.ones(n1, int)]
    X = rng.normal(size=(n0 + n1, k))
    X[:, :n_signal] += shift * y[:, None]
    return _table(X, y)


def test_auc_examples():
    assert auc_roc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == 0.75
    assert auc_roc([1, 2, 3, 4], [0, 0, 1, 1]) == 1.0
    assert auc_roc([4, 3, 2, 1], [0, 0, 1, 1]) == 0.0
    assert auc_roc([5, 5, 5, 5], [0, 1, 0, 1]) == 0.5


def test_auc_requires_both_classes():
    with pytest.raises(ValueError):
        auc_roc([1, 2], [1, 1])


def test_auc_matches_pair_counting():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 80))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        s = rng.integers(0, 6, n).astype(float) if rng.random() < 0.5 else rng.normal(size=n)
        assert auc_roc(s, y) == pytest.approx(brute_auc(s, y), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.booleans()), min_size=2, max_size=40))
def test_auc_complement_and_monotone_invariance(pairs):
    s = np.array([p[0] for p in pairs], float)
    y = np.array([int(p[1]) for p in pairs])
    if y.min() == y.max():
        return
    a = auc_roc(s, y)
    assert auc_roc(-s, y) == pytest.approx(1 - a, abs=1e-12)
    assert auc_roc(np.exp(s / 5) * 3 + 1, y) == pytest.approx(a, abs=1e-12)


def test_folds_one_of_each_class():
    y = np.r_[np.zeros(5, int), np.ones(5, int)]
    folds = stratified_folds(y, CVConfig(n_folds=5))
    for f in range(5):
        assert sorted(y[folds == f]) == [0, 1]


def test_folds_deterministic_and_seed_sensitive():
    y = np.r_[np.zeros(30, int), np.ones(12, int)]
    a = stratified_folds(y, CVConfig(seed=3))
    assert np.array_equal(a, stratified_folds(y, CVConfig(seed=3)))
    assert not np.array_equal(a, stratified_folds(y, CVConfig(seed=4)))


def test_fold_sizes_balanced():
    y = np.r_[np.zeros(20, int), np.ones(7, int)]
    folds = stratified_folds(y, CVConfig(n_folds=5))
    assert sorted(np.bincount(folds[y == 1], minlength=5)) == [1, 1, 1, 2, 2]
    sizes = np.bincount(folds, minlength=5)
    assert sizes.max() - sizes.min() <= 1


def test_folds_exceeding_minority_rejected():
    y = np.r_[np.zeros(20, int), np.ones(3, int)]
    with pytest.raises(ConfigError):
        stratified_folds(y, CVConfig(n_folds=5))
    with pytest.raises(ConfigError):
        stratified_folds(y, CVConfig(n_folds=1))


def test_p_value_formula():
    assert permutation_p_value(3, 1000) == pytest.approx(4 / 1001)
    assert round(permutation_p_value(3, 1000), 3) == 0.004
    assert permutation_p_value(1000, 1000) == 1.0
    assert permutation_p_value(0, 99) == 0.01


def test_bootstrap_perfect_separation():
    r = bootstrap_ci([0.1, 0.2, 0.3, 0.7, 0.8, 0.9], [0, 0, 0, 1, 1, 1], n_resamples=500, seed=1)
    assert (r.point_auc, r.ci_low, r.ci_high) == (1.0, 1.0, 1.0)


def test_bootstrap_single_resample_and_determinism():
    rng = np.random.default_rng(2)
    s, y = rng.normal(size=40), np.r_[np.zeros(25, int), np.ones(15, int)]
    r = bootstrap_ci(s, y, n_resamples=1, seed=9)
    assert r.ci_low == r.ci_high
    a = bootstrap_ci(s, y, n_resamples=300, seed=9)
    b = bootstrap_ci(s, y, n_resamples=300, seed=9)
    assert a.resampled_aucs.tobytes() == b.resampled_aucs.tobytes()
    assert a.ci_low <= a.point_auc <= a.ci_high


def test_bootstrap_redraws_single_class_resamples():
    # with one positive, most resamples lack it; every kept resample is still two-class
    r = bootstrap_ci([0.1, 0.2, 0.9], [0, 0, 1], n_resamples=200, seed=0)
    assert np.isfinite(r.resampled_aucs).all()
    with pytest.raises(ConfigError):
        bootstrap_ci([0.1, 0.9], [0, 1], n_resamples=0)


def test_rank_channels_order_and_exclusion():
    rng = np.random.default_rng(3)
    y = np.r_[np.zeros(30, int), np.ones(30, int)]
    X = np.column_stack([rng.normal(size=60), y + 0.3 * rng.normal(size=60), np.full(60, 2.0)])
    rows = rank_channels(_table(X, y, ["noise", "signal", "flat"]))
    assert [r[0] for r in rows] == ["signal", "noise"]
    assert rows[0][1] > rows[1][1]


def test_rank_channels_null_p_values_uniform():
    rng = np.random.default_rng(4)
    y = np.r_[np.zeros(40, int), np.ones(25, int)]
    rows = rank_channels(_table(rng.normal(size=(65, 1000)), y))
    p = np.array([r[2] for r in rows])
    assert kstest(p, "uniform").pvalue > 0.01


def test_cv_matches_manual_fold_fits():
    rng = np.random.default_rng(5)
    tab = _effect_table(rng, k=8)
    pcfg, cvcfg = PipelineConfig(k=3), CVConfig(seed=11)
    res = run_cv(tab, pcfg, cvcfg)
    folds = stratified_folds(tab.labels, cvcfg)
    for f in range(cvcfg.n_folds):
        tr, te = folds != f, folds == f
        pipe = fit_pipeline(tab.features[tr], tab.labels[tr], config=pcfg)
        np.testing.assert_array_equal(res.pooled_scores[te], score_pipeline(pipe, tab.features[te]))
    assert res.mean_auc == pytest.approx(np.mean(res.fold_aucs))
    assert len(res.selected_features) == 5 and all(len(s) == 3 for s in res.selected_features)


def test_cv_null_and_strong_effect():
    rng = np.random.default_rng(6)
    null = run_cv(_effect_table(rng, shift=0.0))
    assert 0.3 <= null.mean_auc <= 0.7
    strong = run_cv(_effect_table(rng, shift=2.0))
    assert strong.mean_auc >= 0.85


def test_cv_stable_under_row_reordering():
    rng = np.random.default_rng(7)
    tab = _effect_table(rng, shift=1.0)
    perm = rng.permutation(len(tab.labels))
    a = run_cv(tab).mean_auc
    b = run_cv(tab.take_rows(perm)).mean_auc
    assert abs(a - b) <= 0.05


def test_cv_drops_all_invalid_columns():
    rng = np.random.default_rng(8)
    tab = _effect_table(rng, k=5)
    X = tab.features.copy()
    X[:, 4] = np.nan
    res = run_cv(_table(X, tab.labels), PipelineConfig(k=15))
    assert all("f4" not in s for s in res.selected_features)


def test_permutation_test_properties():
    rng = np.random.default_rng(9)
    tab = _effect_table(rng, n0=30, n1=20, k=10, shift=1.5)
    a = permutation_test(tab, PipelineConfig(k=3), m=19, seed=5)
    b = permutation_test(tab, PipelineConfig(k=3), m=19, seed=5, threads=2)
    assert a.null_scores.tobytes() == b.null_scores.tobytes()
    assert a.p == b.p == (a.b + 1) / 20
    assert a.observed == run_cv(tab, PipelineConfig(k=3)).mean_auc
    assert a.p == 0.05


def test_permutation_test_rejects_zero():
    tab = _effect_table(np.random.default_rng(10), k=3)
    with pytest.raises(ConfigError):
        permutation_test(tab, m=0)
