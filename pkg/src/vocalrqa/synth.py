"""Synthetic labeled cohorts whose classes differ only in their dynamics.

Each channel is a hold-or-refresh process: at every frame the previous value
is kept with probability ``a`` and otherwise replaced by a fresh
``N(0, noise_std^2)`` draw. Its lag-k autocorrelation is ``a**k``, as for an
AR(1) with coefficient ``a``, but the marginal distribution is
``N(0, noise_std^2)`` whatever ``a`` is. Class 1 adds ``ar_shift`` to ``a`` on
the first ``n_informative`` channels. Levels and spreads are therefore equal
across classes and only the revisitation structure (and with it the
recurrence rate) moves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import seeding
from .data import Cohort, LabelRecord, TrajectoryMatrix
from .rqa import RecurrenceParams, recurrence_rate

BASE_COEFFICIENT = 0.5
BURN_IN = 200


@dataclass(frozen=True)
class SynthConfig:
    n_per_class: tuple = (100, 42)
    frames: int = 1500
    channels: int = 74
    n_informative: int = 10
    ar_shift: float = 0.25
    noise_std: float = 1.0
    seed: int = 42
    missing_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "n_per_class", tuple(int(n) for n in self.n_per_class))
        if len(self.n_per_class) != 2 or min(self.n_per_class) < 1:
            raise ValueError("n_per_class needs two positive counts (class 0, class 1)")
        if self.frames < 2:
            raise ValueError("frames must be >= 2")
        if self.channels < 1:
            raise ValueError("channels must be >= 1")
        if not 0 <= self.n_informative <= self.channels:
            raise ValueError("n_informative must lie in [0, channels]")
        if not 0 <= BASE_COEFFICIENT + self.ar_shift < 1:
            raise ValueError(f"class-1 coefficient {BASE_COEFFICIENT + self.ar_shift} outside [0, 1)")
        if not self.noise_std > 0:
            raise ValueError("noise_std must be positive")
        if not 0 <= self.missing_rate < 1:
            raise ValueError("missing_rate must lie in [0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    def coefficients(self, label: int) -> np.ndarray:
        a = np.full(self.channels, BASE_COEFFICIENT)
        if label == 1:
            a[: self.n_informative] += self.ar_shift
        return a


def hold_refresh(rng: np.random.Generator, coefficients, frames: int, noise_std: float = 1.0, burn_in: int = BURN_IN) -> np.ndarray:
    """``frames x len(coefficients)`` hold-or-refresh series (see module doc)."""
    a = np.asarray(coefficients, dtype=np.float64)
    total = burn_in + frames
    fresh = rng.standard_normal((total, len(a))) * noise_std
    keep = rng.random((total, len(a))) < a
    keep[0] = False
    src = np.where(keep, 0, np.arange(total)[:, None])
    np.maximum.accumulate(src, axis=0, out=src)
    return np.take_along_axis(fresh, src, axis=0)[burn_in:]


def participant_labels(config: SynthConfig) -> np.ndarray:
    n0, n1 = config.n_per_class
    y = np.r_[np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)]
    return seeding.substream(config.seed, seeding.SYNTH_LABELS).permutation(y)


def generate_participant(config: SynthConfig, index: int, label: int) -> TrajectoryMatrix:
    rng = seeding.substream(config.seed, seeding.SYNTH_PARTICIPANT, index)
    X = hold_refresh(rng, config.coefficients(label), config.frames, config.noise_std)
    if config.missing_rate > 0:
        X[rng.random(X.shape) < config.missing_rate] = np.nan
    return TrajectoryMatrix(f"P{index + 1:04d}", X)


def generate_cohort(config: SynthConfig) -> Cohort:
    labels = participant_labels(config)
    members = []
    for i, lab in enumerate(labels):
        traj = generate_participant(config, i, int(lab))
        members.append((traj, LabelRecord(traj.participant_id, int(lab))))
    return Cohort(tuple(members))


def rr_gap_estimate(config: SynthConfig, n_series: int = 200, params: RecurrenceParams = RecurrenceParams()) -> tuple[float, float]:
    """Monte Carlo (gap, standard error) of mean RR, class 1 minus class 0,
    on an informative channel. Uses its own substream of ``config.seed``."""
    rng = seeding.substream(config.seed, seeding.RR_GAP)
    out = []
    for a in (BASE_COEFFICIENT, BASE_COEFFICIENT + config.ar_shift):
        X = hold_refresh(rng, np.full(n_series, a), config.frames, config.noise_std)
        out.append(np.array([recurrence_rate(X[:, j], params).recurrence_rate for j in range(n_series)]))
    r0, r1 = out
    se = float(np.sqrt(r0.var(ddof=1) / n_series + r1.var(ddof=1) / n_series))
    return float(r1.mean() - r0.mean()), se


def expected_rr_gap(config: SynthConfig, n_series: int = 200, params: RecurrenceParams = RecurrenceParams()) -> float:
    return rr_gap_estimate(config, n_series, params)[0]
