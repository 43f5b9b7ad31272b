"""Cross-validated AUC, permutation test, bootstrap CI and channel ranking."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.stats import rankdata

from . import seeding
from .data import CohortFeatureTable
from .parallel import ordered_map
from .pipeline import PipelineConfig, anova_f_columns, fit_pipeline, score_pipeline


class ConfigError(ValueError):
    """Evaluation settings are inconsistent with the data."""


@dataclass(frozen=True)
class CVConfig:
    n_folds: int = 5
    shuffle: bool = True
    seed: int = 42

    def validate(self, labels) -> None:
        y = np.asarray(labels)
        minority = int(min(np.sum(y == 0), np.sum(y == 1)))
        if self.n_folds < 2:
            raise ConfigError("n_folds must be at least 2")
        if self.n_folds > minority:
            raise ConfigError(f"n_folds={self.n_folds} exceeds the minority class count ({minority})")


@dataclass(frozen=True)
class CVResult:
    fold_aucs: np.ndarray
    mean_auc: float
    pooled_scores: np.ndarray
    pooled_labels: np.ndarray
    fold_assignment: np.ndarray
    selected_features: tuple = ()

    @property
    def pooled_auc(self) -> float:
        return auc_roc(self.pooled_scores, self.pooled_labels)


@dataclass(frozen=True)
class PermutationResult:
    observed: float
    null_scores: np.ndarray
    b: int
    m: int
    p: float
    statistic: str = "mean_fold_auc"


@dataclass(frozen=True)
class BootstrapResult:
    point_auc: float
    ci_low: float
    ci_high: float
    n_resamples: int
    seed: int
    resampled_aucs: np.ndarray = field(default=None, repr=False)


def auc_roc(scores, labels) -> float:
    """Mann-Whitney AUC with mid-ranks for tied scores."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    if not np.isfinite(s).all():
        raise ValueError("scores must be finite")
    ranks = rankdata(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def permutation_p_value(b: int, m: int) -> float:
    return (b + 1) / (m + 1)


def stratified_folds(labels, config: CVConfig = CVConfig()) -> np.ndarray:
    """Fold index per participant.

    Each class is shuffled with the fold substream and dealt round-robin; the
    dealing position carries over from one class to the next so overall fold
    sizes also stay within one of each other.
    """
    y = np.asarray(labels)
    config.validate(y)
    rng = seeding.substream(config.seed, seeding.FOLDS)
    folds = np.empty(len(y), dtype=np.int64)
    offset = 0
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        if config.shuffle:
            idx = rng.permutation(idx)
        folds[idx] = (offset + np.arange(len(idx))) % config.n_folds
        offset = (offset + len(idx)) % config.n_folds
    return folds


def _cv_arrays(X, mask, y, pcfg: PipelineConfig, cvcfg: CVConfig, names=None) -> CVResult:
    folds = stratified_folds(y, cvcfg)
    scores = np.empty(len(y))
    aucs = []
    selected = []
    for f in range(cvcfg.n_folds):
        test = folds == f
        train = ~test
        pipe = fit_pipeline(X[train], y[train], mask[train], pcfg)
        scores[test] = score_pipeline(pipe, X[test], mask[test])
        aucs.append(auc_roc(scores[test], y[test]))
        if names is not None:
            selected.append(tuple(names[j] for j in pipe.selector.selected))
    aucs = np.array(aucs)
    return CVResult(aucs, float(np.mean(aucs)), scores, np.asarray(y).copy(), folds, tuple(selected))


def _usable(table: CohortFeatureTable):
    cols = table.usable_columns()
    return table.features[:, cols], table.valid_mask[:, cols], [table.feature_names[j] for j in cols]


def run_cv(table: CohortFeatureTable, pipeline_config: PipelineConfig = PipelineConfig(), cv_config: CVConfig = CVConfig()) -> CVResult:
    """Stratified k-fold CV; standardization and selection are refit per fold."""
    X, mask, names = _usable(table)
    return _cv_arrays(X, mask, table.labels, pipeline_config, cv_config, names)


def _null_score(i: int, X, mask, y, pcfg, cvcfg, seed) -> float:
    yp = seeding.substream(seed, seeding.PERMUTATION, i).permutation(y)
    return _cv_arrays(X, mask, yp, pcfg, cvcfg).mean_auc


def permutation_test(
    table: CohortFeatureTable,
    pipeline_config: PipelineConfig = PipelineConfig(),
    cv_config: CVConfig = CVConfig(),
    m: int = 1000,
    seed: int | None = None,
    threads: int = 1,
    observed: float | None = None,
) -> PermutationResult:
    """Label-permutation test of the mean fold AUC.

    Every permutation reruns the whole cross-validation, per-fold selection
    included. Permutation ``i`` draws its labels from substream ``i`` of
    ``seed`` (default: the CV seed), so results do not depend on ``threads``.
    """
    if m < 1:
        raise ConfigError("number of permutations must be >= 1")
    seed = cv_config.seed if seed is None else seed
    X, mask, _ = _usable(table)
    y = table.labels
    if observed is None:
        observed = _cv_arrays(X, mask, y, pipeline_config, cv_config).mean_auc
    work = partial(_null_score, X=X, mask=mask, y=y, pcfg=pipeline_config, cvcfg=cv_config, seed=seed)
    null = np.array(ordered_map(work, range(m), threads))
    b = int(np.sum(null >= observed))
    return PermutationResult(float(observed), null, b, m, permutation_p_value(b, m))


def bootstrap_ci(scores, labels, n_resamples: int = 2000, seed: int = 42, max_redraws: int = 10_000) -> BootstrapResult:
    """Percentile CI (2.5, 97.5; linear interpolation) of the AUC over
    participant resamples. Single-class resamples are drawn again."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if n_resamples < 1:
        raise ConfigError("n_resamples must be >= 1")
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise ValueError("bootstrap needs at least one participant of each class")
    point = auc_roc(s, y)
    rng = seeding.substream(seed, seeding.BOOTSTRAP)
    n = len(y)
    aucs = np.empty(n_resamples)
    for r in range(n_resamples):
        for _ in range(max_redraws):
            idx = rng.integers(0, n, n)
            yy = y[idx]
            if yy.min() != yy.max():
                break
        else:
            raise ValueError("could not draw a two-class bootstrap resample")
        aucs[r] = auc_roc(s[idx], yy)
    lo, hi = np.percentile(aucs, [2.5, 97.5])
    return BootstrapResult(point, float(lo), float(hi), n_resamples, seed, aucs)


def rank_channels(table: CohortFeatureTable, labels=None) -> list[tuple[str, float, float]]:
    """(feature, F, p) by descending F, ties by name; undefined F dropped."""
    y = table.labels if labels is None else np.asarray(labels)
    F, p = anova_f_columns(table.features, y, table.valid_mask)
    rows = [(name, float(F[j]), float(p[j])) for j, name in enumerate(table.feature_names) if np.isfinite(F[j])]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows
