"""Recurrence rate and determinism on scalar channel trajectories.

Two points of a series recur when ``|x_i - x_j| <= eps`` (the threshold is
inclusive, so a constant series recurs everywhere). ``eps`` is
``epsilon_factor`` times the population standard deviation of the finite,
frame-capped series.

The recurrence rate only depends on the multiset of values, so it is computed
by sorting and counting neighbours within ``eps`` instead of building the
N x N matrix. Determinism needs the time ordering and scans the upper
triangle one tile of diagonals at a time.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import partial

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .data import DEFAULT_MAX_FRAMES, Cohort, CohortFeatureTable, TrajectoryMatrix
from .parallel import ordered_map

# elements per diagonal tile; keeps temporaries at a few MB
_TILE_ELEMENTS = 1 << 20


@dataclass(frozen=True)
class RecurrenceParams:
    epsilon_factor: float = 0.2
    include_main_diagonal: bool = True
    min_diag_length: int = 2
    max_frames: int = DEFAULT_MAX_FRAMES

    def __post_init__(self):
        if not self.epsilon_factor > 0:
            raise ValueError("epsilon_factor must be > 0")
        if self.min_diag_length < 2:
            raise ValueError("min_diag_length must be >= 2")
        if self.max_frames < 2:
            raise ValueError("max_frames must be >= 2")


@dataclass(frozen=True)
class RecurrenceStats:
    recurrence_rate: float
    determinism: float  # NaN when no off-diagonal recurrence exists
    frames_used: int
    epsilon_value: float


def cap_frames(series, max_frames: int) -> np.ndarray:
    """Same uniform-stride rule as :func:`vocalrqa.data.subsample_frames`."""
    x = np.asarray(series, dtype=np.float64)
    if len(x) > max_frames:
        x = x[:: -(-len(x) // max_frames)]
    return x


def prepare_series(series, params: RecurrenceParams) -> np.ndarray:
    """Cap frames, then drop missing values keeping temporal order."""
    x = cap_frames(series, params.max_frames)
    return x[np.isfinite(x)]


def threshold(x: np.ndarray, epsilon_factor: float) -> float:
    return float(epsilon_factor * np.std(x))


def recurrence_matrix(series, epsilon: float) -> np.ndarray:
    """Boolean N x N recurrence matrix with ``R[i, j] = |x_i - x_j| <= epsilon``."""
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or len(x) < 2:
        raise ValueError("recurrence_matrix needs a 1-D series with at least 2 points")
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    return np.abs(x[:, None] - x[None, :]) <= epsilon


def count_recurrent_pairs(x: np.ndarray, epsilon: float) -> int:
    """Number of unordered pairs ``i < j`` with ``|x_i - x_j| <= epsilon``.

    Sort, then for every sorted position find the end of its ``eps``
    neighbourhood. ``searchsorted(s, s + eps)`` can be off by a few ulps from
    the comparison ``s_j - s_i <= eps`` the definition uses, so the boundary
    is then moved until it agrees with that comparison exactly. The
    comparison is monotone in ``j`` because rounding is monotone, so moving
    over runs of equal values terminates.
    """
    s = np.sort(np.asarray(x, dtype=np.float64))
    n = len(s)
    idx = np.arange(n)
    k = np.searchsorted(s, s + epsilon, side="right")
    while True:
        changed = False
        right = np.flatnonzero(k < n)
        right = right[s[k[right]] - s[right] <= epsilon]
        if right.size:
            k[right] = np.searchsorted(s, s[k[right]], side="right")
            changed = True
        left = np.flatnonzero(k - 1 > idx)
        left = left[s[k[left] - 1] - s[left] > epsilon]
        if left.size:
            k[left] = np.searchsorted(s, s[k[left] - 1], side="left")
            changed = True
        if not changed:
            break
    return int(np.sum(k - idx - 1))


def _rate(x: np.ndarray, eps: float, include_main_diagonal: bool) -> float:
    n = len(x)
    count = 2 * count_recurrent_pairs(x, eps)
    if include_main_diagonal:
        count += n
    return count / (n * n)


def diagonal_line_counts(x: np.ndarray, epsilon: float, min_diag_length: int = 2) -> tuple[int, int]:
    """Upper-triangle recurrence points: ``(on lines >= min_diag_length, total)``.

    Main diagonal excluded. Row ``r`` of a tile holds diagonal ``k0 + r``
    read from a NaN-padded copy of the series, so positions past the end
    compare False and terminate runs.
    """
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    padded = np.concatenate([x, np.full(n, np.nan)])
    windows = sliding_window_view(padded, n)
    block = max(1, _TILE_ELEMENTS // (n + 2))
    on_lines = 0
    total = 0
    for k0 in range(1, n, block):
        k1 = min(k0 + block, n)
        width = n - k0
        tile = np.zeros((k1 - k0, width + 2), dtype=np.int8)
        with np.errstate(invalid="ignore"):
            tile[:, 1:-1] = np.abs(windows[k0:k1, :width] - x[:width]) <= epsilon
        edges = np.diff(tile, axis=1)
        starts = np.nonzero(edges == 1)[1]
        ends = np.nonzero(edges == -1)[1]
        lengths = ends - starts
        total += int(lengths.sum())
        on_lines += int(lengths[lengths >= min_diag_length].sum())
    return on_lines, total


def _determinism(x: np.ndarray, eps: float, min_diag_length: int) -> float:
    # the lower triangle mirrors the upper one, so the ratio is unchanged
    on_lines, total = diagonal_line_counts(x, eps, min_diag_length)
    return on_lines / total if total else float("nan")


def recurrence_rate(series, params: RecurrenceParams = RecurrenceParams()) -> RecurrenceStats | None:
    """RR of one channel; ``None`` when fewer than 2 finite frames remain."""
    x = prepare_series(series, params)
    if len(x) < 2:
        return None
    eps = threshold(x, params.epsilon_factor)
    return RecurrenceStats(_rate(x, eps, params.include_main_diagonal), float("nan"), len(x), eps)


def determinism_proxy(series, params: RecurrenceParams = RecurrenceParams()) -> float:
    """Fraction of off-diagonal recurrence points on diagonal lines; NaN if undefined."""
    x = prepare_series(series, params)
    if len(x) < 2:
        return float("nan")
    return _determinism(x, threshold(x, params.epsilon_factor), params.min_diag_length)


def recurrence_stats(series, params: RecurrenceParams = RecurrenceParams()) -> RecurrenceStats | None:
    x = prepare_series(series, params)
    if len(x) < 2:
        return None
    eps = threshold(x, params.epsilon_factor)
    return RecurrenceStats(
        _rate(x, eps, params.include_main_diagonal),
        _determinism(x, eps, params.min_diag_length),
        len(x),
        eps,
    )


def recurrence_row(traj: TrajectoryMatrix, params: RecurrenceParams) -> np.ndarray:
    out = np.full(traj.channel_count, np.nan)
    for c in range(traj.channel_count):
        st = recurrence_rate(traj.channel(c), params)
        if st is not None:
            out[c] = st.recurrence_rate
    return out


def determinism_row(traj: TrajectoryMatrix, params: RecurrenceParams) -> np.ndarray:
    return np.array([determinism_proxy(traj.channel(c), params) for c in range(traj.channel_count)])


def assemble_table(cohort: Cohort, row_fn, names, threads: int = 1) -> CohortFeatureTable:
    rows = ordered_map(row_fn, cohort.trajectories, threads)
    X = np.vstack(rows) if rows else np.empty((0, len(names)))
    return CohortFeatureTable(tuple(cohort.participant_ids), cohort.labels, X, names, np.isfinite(X))


def extract_recurrence_features(cohort: Cohort, params: RecurrenceParams = RecurrenceParams(), threads: int = 1) -> CohortFeatureTable:
    names = [f"rr_ch{c + 1}" for c in range(cohort.channel_count)]
    return assemble_table(cohort, partial(recurrence_row, params=params), names, threads)


def extract_determinism_features(cohort: Cohort, params: RecurrenceParams = RecurrenceParams(), threads: int = 1) -> CohortFeatureTable:
    names = [f"determinism_ch{c + 1}" for c in range(cohort.channel_count)]
    return assemble_table(cohort, partial(determinism_row, params=params), names, threads)
