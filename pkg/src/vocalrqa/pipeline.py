"""Standardize -> ANOVA top-k selection -> L2 logistic regression.

Every fitted piece is frozen once trained; scoring never touches fitted state.
Missing cells are ignored when fitting the standardizer and the F-scores and
become 0 (the training mean) after standardization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, expit

_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class PipelineConfig:
    k: int = 15
    l2_strength: float = 1.0
    max_iter: int = 1000
    tol: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be nonnegative")


def _mask_for(X: np.ndarray, mask) -> np.ndarray:
    m = np.isfinite(X)
    if mask is not None:
        m &= np.asarray(mask, dtype=bool)
    return m


# ---------------------------------------------------------------------------
# ANOVA


def f_pvalue(F, df_between, df_within):
    """Upper tail of the F distribution via the regularized incomplete beta."""
    F = np.asarray(F, dtype=np.float64)
    x = df_within / (df_within + df_between * F)
    return betainc(df_within / 2.0, df_between / 2.0, x)


def anova_f_columns(X, labels, mask=None) -> tuple[np.ndarray, np.ndarray]:
    """Two-group one-way ANOVA for every column; NaN where undefined.

    A column is undefined when either class has fewer than 2 valid entries
    or when the within-group sum of squares is zero up to rounding.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(labels)
    m = _mask_for(X, None if mask is None else np.reshape(mask, X.shape))
    Xz = np.where(m, X, 0.0)
    g1 = (y == 1)[:, None]
    m0 = m & ~g1
    m1 = m & g1
    n0 = m0.sum(axis=0)
    n1 = m1.sum(axis=0)
    n = n0 + n1
    with np.errstate(invalid="ignore", divide="ignore"):
        mean0 = np.where(m0, Xz, 0.0).sum(axis=0) / n0
        mean1 = np.where(m1, Xz, 0.0).sum(axis=0) / n1
        grand = Xz.sum(axis=0) / n
        ssw = (np.where(m0, Xz - mean0, 0.0) ** 2).sum(axis=0) + (np.where(m1, Xz - mean1, 0.0) ** 2).sum(axis=0)
        ssb = n0 * (mean0 - grand) ** 2 + n1 * (mean1 - grand) ** 2
        scale = np.abs(Xz).max(axis=0, initial=0.0)
        flat = ssw <= n * (4 * _EPS * scale) ** 2
        df_w = n - 2
        F = (ssb / 1.0) / (ssw / df_w)
    undefined = (n0 < 2) | (n1 < 2) | flat
    F = np.where(undefined, np.nan, F)
    p = np.full_like(F, np.nan)
    ok = ~undefined
    p[ok] = f_pvalue(F[ok], 1.0, df_w[ok].astype(np.float64))
    return F, p


def anova_f(column, labels, mask=None) -> tuple[float, float]:
    F, p = anova_f_columns(np.asarray(column, dtype=np.float64)[:, None], labels, None if mask is None else np.asarray(mask)[:, None])
    return float(F[0]), float(p[0])


# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Standardizer:
    means: np.ndarray
    stds: np.ndarray  # raw; flat columns are divided by 1 at apply time

    def safe_stds(self) -> np.ndarray:
        scale = np.maximum(np.abs(self.means), 1.0)
        return np.where(self.stds > 1e-12 * scale, self.stds, 1.0)

    def apply(self, X, mask=None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[1] != len(self.means):
            raise ValueError(f"expected {len(self.means)} columns, got {X.shape[1]}")
        m = _mask_for(X, mask)
        with np.errstate(invalid="ignore"):
            Z = (X - self.means) / self.safe_stds()
        Z[~m] = 0.0
        return Z


def fit_standardizer(X, mask=None) -> Standardizer:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("standardizer needs at least 2 rows")
    m = _mask_for(X, mask)
    cnt = m.sum(axis=0)
    Xz = np.where(m, X, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(cnt > 0, Xz.sum(axis=0) / cnt, 0.0)
        var = np.where(cnt > 0, (np.where(m, X - means, 0.0) ** 2).sum(axis=0) / cnt, 0.0)
    return Standardizer(means, np.sqrt(var))


def apply_standardizer(s: Standardizer, X, mask=None) -> np.ndarray:
    return s.apply(X, mask)


# ---------------------------------------------------------------------------
# selection


@dataclass(frozen=True)
class AnovaSelector:
    k: int
    scores: np.ndarray
    selected: np.ndarray


def fit_selector(Z, labels, mask=None, k: int = 15) -> AnovaSelector:
    F, _ = anova_f_columns(Z, labels, mask)
    defined = np.flatnonzero(np.isfinite(F))
    # descending F, ties by ascending column index
    order = defined[np.lexsort((defined, -F[defined]))]
    return AnovaSelector(k, F, order[:k])


# ---------------------------------------------------------------------------
# logistic regression


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    bias: float
    l2_strength: float
    converged: bool
    iterations: int
    loss_history: tuple = ()


def logistic_objective(w, b, X, y, l2_strength):
    """Mean negative log-likelihood plus ``l2/(2n) |w|^2``; returns (loss, grad_w, grad_b)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_strength / n * float(w @ w)
    r = expit(z) - y
    return float(loss), X.T @ r / n + l2_strength / n * w, float(np.mean(r))


def fit_logistic(X, y, l2_strength: float = 1.0, max_iter: int = 1000, tol: float = 1e-6) -> LogisticModel:
    """Damped Newton from zero, stopping when the gradient norm is <= ``tol``.

    Backtracking keeps every accepted step a strict decrease of the
    objective, so ``loss_history`` is non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(y) != X.shape[0]:
        raise ValueError("X must be n x k with one label per row")
    if len(y) < 2 or len(np.unique(y)) < 2:
        raise ValueError("logistic regression needs both classes in the training data")
    if not np.isfinite(X).all():
        raise ValueError("X must be finite")
    n, k = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(k + 1)
    ridge = np.full(k + 1, l2_strength / n)
    ridge[-1] = 0.0

    def objective(th):
        return logistic_objective(th[:-1], th[-1], X, y, l2_strength)

    loss, gw, gb = objective(theta)
    history = [loss]
    converged = False
    it = 0
    while it < max_iter:
        grad = np.append(gw, gb)
        if np.linalg.norm(grad) <= tol:
            converged = True
            break
        p = expit(Xb @ theta)
        H = (Xb * (p * (1 - p))[:, None]).T @ Xb / n + np.diag(ridge)
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = -grad
        if not np.all(np.isfinite(step)) or grad @ step >= 0:
            step = -grad
        t = 1.0
        slope = float(grad @ step)
        accepted = False
        for _ in range(60):
            cand = theta + t * step
            c_loss, c_gw, c_gb = objective(cand)
            if c_loss <= loss + 1e-4 * t * slope and c_loss < loss:
                accepted = True
                break
            t *= 0.5
        it += 1
        if not accepted:
            # no representable decrease left along any step; treat as stationary
            converged = np.linalg.norm(grad) <= np.sqrt(tol)
            break
        theta, loss, gw, gb = cand, c_loss, c_gw, c_gb
        history.append(loss)
    else:
        converged = np.linalg.norm(np.append(gw, gb)) <= tol
    return LogisticModel(theta[:-1].copy(), float(theta[-1]), float(l2_strength), bool(converged), it, tuple(history))


def predict_proba(model: LogisticModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(model.weights):
        raise ValueError(f"model expects {len(model.weights)} columns, got shape {X.shape}")
    return expit(X @ model.weights + model.bias)


# ---------------------------------------------------------------------------
# composed pipeline


@dataclass(frozen=True)
class FittedPipeline:
    standardizer: Standardizer
    selector: AnovaSelector
    model: LogisticModel
    config: PipelineConfig


def fit_pipeline(X, y, mask=None, config: PipelineConfig = PipelineConfig()) -> FittedPipeline:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(np.unique(y)) < 2:
        raise ValueError("training rows must contain both classes")
    m = _mask_for(X, mask)
    std = fit_standardizer(X, m)
    Z = std.apply(X, m)
    sel = fit_selector(Z, y, m, config.k)
    model = fit_logistic(Z[:, sel.selected], y, config.l2_strength, config.max_iter, config.tol)
    return FittedPipeline(std, sel, model, config)


def score_pipeline(pipe: FittedPipeline, X, mask=None) -> np.ndarray:
    Z = pipe.standardizer.apply(X, mask)
    return predict_proba(pipe.model, Z[:, pipe.selector.selected])
