"""Comparison feature families: static summaries, sample entropy, AR(1)
forecastability, Hurst exponent and the log-step instability proxy.

Scalar functions return NaN and structured ones return ``None`` when the
value is undefined for the given series; extractors turn that into an
invalid cell. Missing frames are dropped for the value-distribution
measures, while the step-based measures (AR(1), instability proxy) only
pair frames that are adjacent in the original recording.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import gammaln

from .data import Cohort, CohortFeatureTable, TrajectoryMatrix, finite_subsequence
from .rqa import (
    RecurrenceParams,
    assemble_table,
    cap_frames,
    extract_determinism_features,
    extract_recurrence_features,
)

FAMILIES = ("static", "entropy", "forecastability", "hurst", "lyapunov", "determinism", "recurrence")
HURST_ESTIMATOR = "rescaled-range, Anis-Lloyd-Peters small-sample correction, dyadic windows 8..N/2"
ENTROPY_MEASURE = "sample entropy, m=2, r=0.2*sigma, Chebyshev distance, self-matches excluded"

_TILE_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class AR1Fit:
    coefficient: float
    residual_std: float
    lag1_autocorr: float
    forecast_rmse: float


@dataclass(frozen=True)
class HurstEstimate:
    exponent: float
    n_scales: int
    fit_residual: float
    scales: tuple = ()
    rescaled_ranges: tuple = ()


@dataclass(frozen=True)
class LyapunovProxy:
    lambda_star: float
    delta: float


def static_pooled(series) -> tuple[float, float] | None:
    """Mean and population standard deviation of the finite values."""
    x = finite_subsequence(series)
    if len(x) < 2:
        return None
    return float(np.mean(x)), float(np.std(x))


def sample_entropy(series, m: int = 2, r_factor: float = 0.2, max_frames: int | None = None) -> float:
    """Sample entropy ``log(B/A)`` with tolerance ``r_factor * sigma``.

    Both counts use the same ``N - m`` template start positions, so that a
    series whose every m-match extends to an (m+1)-match scores exactly 0.
    Counting runs along each diagonal ``j - i = k`` of the pairwise
    ``|x_j - x_i| <= r`` table: a length-L template match at ``(i, i + k)``
    is a run of L consecutive hits starting at ``i``.
    """
    x = np.asarray(series, dtype=np.float64)
    if max_frames is not None:
        x = cap_frames(x, max_frames)
    x = x[np.isfinite(x)]
    n = len(x)
    if n < m + 2:
        return float("nan")
    r = r_factor * np.std(x)
    n_templates = n - m
    padded = np.concatenate([x, np.full(n, np.nan)])
    windows = sliding_window_view(padded, n)
    block = max(1, _TILE_ELEMENTS // (n + 1))
    A = 0
    B = 0
    for k0 in range(1, n_templates, block):
        k1 = min(k0 + block, n_templates)
        ks = np.arange(k0, k1)
        width = n - k0
        hits = np.zeros((k1 - k0, width + 1), dtype=np.int32)
        with np.errstate(invalid="ignore"):
            hits[:, 1:] = np.abs(windows[k0:k1, :width] - x[:width]) <= r
        cs = np.cumsum(hits, axis=1)
        # template pair (i, i+k) exists for i < n_templates - k <= width - m
        n_starts = width - m
        starts_ok = np.arange(n_starts)[None, :] < (n_templates - ks)[:, None]
        win_m = (cs[:, m : m + n_starts] - cs[:, :n_starts]) == m
        win_m1 = (cs[:, m + 1 : m + 1 + n_starts] - cs[:, :n_starts]) == m + 1
        B += int(np.count_nonzero(win_m & starts_ok))
        A += int(np.count_nonzero(win_m1 & starts_ok))
    if A == 0 or B == 0:
        return float("nan")
    return float(math.log(B / A))


def _adjacent_pairs(series) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(series, dtype=np.float64)
    ok = np.isfinite(x[:-1]) & np.isfinite(x[1:])
    return x[:-1][ok], x[1:][ok]


def ar1_forecastability(series) -> AR1Fit | None:
    """Least-squares ``x[t+1] = a x[t] + e[t]`` on the mean-centred series.

    Forecast error is in-sample. ``None`` for constant or too-short input.
    """
    x = np.asarray(series, dtype=np.float64)
    finite = x[np.isfinite(x)]
    if len(finite) < 3:
        return None
    xc = x - finite.mean()
    prev, nxt = _adjacent_pairs(xc)
    if len(prev) < 2:
        return None
    denom = float(np.dot(prev, prev))
    if denom == 0.0 or np.ptp(prev) == 0.0 or np.ptp(nxt) == 0.0:
        return None
    a = float(np.dot(prev, nxt)) / denom
    resid = nxt - a * prev
    rho = float(np.corrcoef(prev, nxt)[0, 1])
    if not math.isfinite(rho):
        return None
    return AR1Fit(
        coefficient=a,
        residual_std=float(np.std(resid)),
        lag1_autocorr=min(1.0, max(-1.0, rho)),
        forecast_rmse=float(np.sqrt(np.mean(resid**2))),
    )


def expected_rescaled_range(n: int) -> float:
    """Anis-Lloyd expected R/S of ``n`` iid Gaussian values with Peters' (n-1/2)/n factor."""
    i = np.arange(1, n)
    s = np.sum(np.sqrt((n - i) / i))
    return float((n - 0.5) / n * math.exp(gammaln((n - 1) / 2) - gammaln(n / 2)) / math.sqrt(math.pi) * s)


def rescaled_range(x: np.ndarray, n: int) -> float:
    """Mean R/S over the non-overlapping length-``n`` windows; NaN if all are flat."""
    w = x[: (len(x) // n) * n].reshape(-1, n)
    dev = np.cumsum(w - w.mean(axis=1, keepdims=True), axis=1)
    R = dev.max(axis=1) - dev.min(axis=1)
    S = w.std(axis=1)
    ok = S > 0
    if not ok.any():
        return float("nan")
    return float(np.mean(R[ok] / S[ok]))


def hurst_exponent(series, min_window: int = 8) -> HurstEstimate | None:
    """Rescaled-range Hurst exponent over dyadic windows ``min_window .. N/2``.

    The observed log R/S is referenced to its expectation under iid noise
    before the log-log fit, which removes the small-window upward bias of
    plain R/S; ``H = 0.5 + slope``.
    """
    x = finite_subsequence(series)
    N = len(x)
    if N < 64:
        return None
    scales, rs = [], []
    n = min_window
    while n <= N // 2:
        v = rescaled_range(x, n)
        if math.isfinite(v) and v > 0:
            scales.append(n)
            rs.append(v)
        n *= 2
    if len(scales) < 3:
        return None
    logn = np.log(scales)
    y = np.log(rs) - np.log([expected_rescaled_range(s) for s in scales])
    coef, resid, *_ = np.polyfit(logn, y, 1, full=True)
    fit_residual = float(resid[0]) if len(resid) else 0.0
    return HurstEstimate(0.5 + float(coef[0]), len(scales), fit_residual, tuple(scales), tuple(rs))


def lyapunov_proxy(series, delta: float = 1e-8) -> LyapunovProxy | None:
    """Mean of ``log(|x[t+1] - x[t]| + delta)`` over adjacent finite frames."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    prev, nxt = _adjacent_pairs(series)
    if len(prev) == 0:
        return None
    return LyapunovProxy(float(np.mean(np.log(np.abs(nxt - prev) + delta))), delta)


# ---------------------------------------------------------------------------
# cohort extraction


def _static_row(traj: TrajectoryMatrix) -> np.ndarray:
    out = np.full(2 * traj.channel_count, np.nan)
    for c in range(traj.channel_count):
        st = static_pooled(traj.channel(c))
        if st is not None:
            out[2 * c : 2 * c + 2] = st
    return out


def _entropy_row(traj: TrajectoryMatrix, max_frames: int) -> np.ndarray:
    return np.array([sample_entropy(traj.channel(c), max_frames=max_frames) for c in range(traj.channel_count)])


def _forecast_row(traj: TrajectoryMatrix) -> np.ndarray:
    out = np.full(3 * traj.channel_count, np.nan)
    for c in range(traj.channel_count):
        fit = ar1_forecastability(traj.channel(c))
        if fit is not None:
            out[3 * c : 3 * c + 3] = (fit.coefficient, fit.lag1_autocorr, fit.forecast_rmse)
    return out


def _hurst_row(traj: TrajectoryMatrix) -> np.ndarray:
    out = np.full(traj.channel_count, np.nan)
    for c in range(traj.channel_count):
        est = hurst_exponent(traj.channel(c))
        if est is not None:
            out[c] = est.exponent
    return out


def _lyapunov_row(traj: TrajectoryMatrix, delta: float) -> np.ndarray:
    out = np.full(traj.channel_count, np.nan)
    for c in range(traj.channel_count):
        lp = lyapunov_proxy(traj.channel(c), delta)
        if lp is not None:
            out[c] = lp.lambda_star
    return out


def feature_names(family: str, channels: int) -> list[str]:
    chs = range(1, channels + 1)
    if family == "static":
        return [f"{s}_ch{c}" for c in chs for s in ("mean", "std")]
    if family == "forecastability":
        return [f"forecastability_ch{c}_{s}" for c in chs for s in ("coef", "lag1", "rmse")]
    if family == "recurrence":
        return [f"rr_ch{c}" for c in chs]
    if family in FAMILIES:
        return [f"{family}_ch{c}" for c in chs]
    raise ValueError(f"unknown feature family {family!r}; choose from {', '.join(FAMILIES)} or 'all'")


def extract_baseline_features(
    cohort: Cohort,
    family: str,
    params: RecurrenceParams = RecurrenceParams(),
    delta: float = 1e-8,
    threads: int = 1,
) -> CohortFeatureTable:
    """Feature table for one family; columns are grouped by channel."""
    names = feature_names(family, cohort.channel_count)
    if family == "recurrence":
        return extract_recurrence_features(cohort, params, threads)
    if family == "determinism":
        return extract_determinism_features(cohort, params, threads)
    row_fn = {
        "static": _static_row,
        "entropy": partial(_entropy_row, max_frames=params.max_frames),
        "forecastability": _forecast_row,
        "hurst": _hurst_row,
        "lyapunov": partial(_lyapunov_row, delta=delta),
    }[family]
    return assemble_table(cohort, row_fn, names, threads)


def extract_features(
    cohort: Cohort,
    family: str,
    params: RecurrenceParams = RecurrenceParams(),
    delta: float = 1e-8,
    threads: int = 1,
) -> CohortFeatureTable:
    """Like :func:`extract_baseline_features`, plus ``family='all'`` which
    concatenates every family with ``"<family>."`` name prefixes."""
    if family != "all":
        return extract_baseline_features(cohort, family, params, delta, threads)
    tables = [extract_baseline_features(cohort, f, params, delta, threads) for f in FAMILIES]
    return CohortFeatureTable.concat(tables, [f"{f}." for f in FAMILIES])
