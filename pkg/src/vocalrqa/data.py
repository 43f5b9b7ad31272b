"""Cohort, trajectory and feature-table types plus their file formats.

Trajectory files are delimiter-separated numeric text, one frame per row and
one channel per column, with an optional header row. Empty or unparseable
cells (COVAREP leaves them in unvoiced frames) become NaN and are counted in
``TrajectoryMatrix.parse_warnings``; the literal ``NaN`` is a normal value.

Manifests are UTF-8 CSV with the header ``participant_id,path,label``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_CHANNELS = 74
DEFAULT_MAX_FRAMES = 2000
MANIFEST_HEADER = ("participant_id", "path", "label")


class DataError(ValueError):
    """Input data violates a format or validation rule."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TrajectoryMatrix:
    """Frames x channels matrix for one participant. NaN marks a missing cell."""

    participant_id: str
    values: np.ndarray
    parse_warnings: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2:
            raise DataError(f"{self.participant_id}: trajectory must be 2-D, got shape {v.shape}")
        if v.shape[0] < 2:
            raise DataError(f"{self.participant_id}: fewer than 2 frames")
        if v.shape[1] < 1:
            raise DataError(f"{self.participant_id}: no channels")
        if np.isinf(v).any():
            raise DataError(f"{self.participant_id}: trajectory contains infinities")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def frame_count(self) -> int:
        return self.values.shape[0]

    @property
    def channel_count(self) -> int:
        return self.values.shape[1]

    def channel(self, c: int) -> np.ndarray:
        """Raw series of channel ``c`` (0-based), NaNs included."""
        return self.values[:, c]

    @property
    def missing_mask(self) -> np.ndarray:
        return np.isnan(self.values)


@dataclass(frozen=True)
class LabelRecord:
    participant_id: str
    label: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"{self.participant_id}: label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class Cohort:
    """Ordered (trajectory, label) pairs sharing one channel count."""

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise DataError("empty cohort")
        ids = [t.participant_id for t, _ in members]
        seen = set()
        for pid in ids:
            if pid in seen:
                raise DataError(f"duplicate participant_id {pid!r}")
            seen.add(pid)
        for t, lab in members:
            if t.participant_id != lab.participant_id:
                raise DataError(f"label record {lab.participant_id!r} paired with trajectory {t.participant_id!r}")
        counts = {t.channel_count for t, _ in members}
        if len(counts) != 1:
            raise DataError(f"channel-count mismatch across participants: {sorted(counts)}")
        labels = {lab.label for _, lab in members}
        if labels != {0, 1}:
            raise DataError(f"cohort must contain both classes, found only {sorted(labels)}")

    @property
    def channel_count(self) -> int:
        return self.members[0][0].channel_count

    @property
    def participant_ids(self) -> list[str]:
        return [t.participant_id for t, _ in self.members]

    @property
    def labels(self) -> np.ndarray:
        return np.array([lab.label for _, lab in self.members], dtype=np.int64)

    @property
    def trajectories(self) -> list[TrajectoryMatrix]:
        return [t for t, _ in self.members]

    def __len__(self):
        return len(self.members)


@dataclass(frozen=True)
class CohortFeatureTable:
    """Participants x features. Invalid cells hold NaN and are False in ``valid_mask``."""

    participant_ids: tuple
    labels: np.ndarray
    features: np.ndarray
    feature_names: tuple
    valid_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        ids = tuple(self.participant_ids)
        names = tuple(self.feature_names)
        y = np.asarray(self.labels, dtype=np.int64).copy()
        X = np.array(self.features, dtype=np.float64, copy=True)
        if X.ndim != 2:
            raise DataError("feature matrix must be 2-D")
        mask = np.isfinite(X) if self.valid_mask is None else np.array(self.valid_mask, dtype=bool, copy=True)
        if not (len(ids) == len(y) == X.shape[0]):
            raise DataError(f"row count mismatch: {len(ids)} ids, {len(y)} labels, {X.shape[0]} rows")
        if X.shape[1] != len(names) or mask.shape != X.shape:
            raise DataError("feature names / mask do not match feature matrix shape")
        if len(set(names)) != len(names):
            raise DataError("duplicate feature names")
        if not np.isin(y, (0, 1)).all():
            raise DataError("labels must be 0 or 1")
        mask &= np.isfinite(X)
        X[~mask] = np.nan
        object.__setattr__(self, "participant_ids", ids)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "labels", _readonly(y))
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "valid_mask", _readonly(mask))

    @property
    def shape(self) -> tuple[int, int]:
        return self.features.shape

    def usable_columns(self) -> np.ndarray:
        """Indices of columns with at least one defined entry."""
        return np.flatnonzero(self.valid_mask.any(axis=0))

    def with_labels(self, labels) -> "CohortFeatureTable":
        return CohortFeatureTable(self.participant_ids, labels, self.features, self.feature_names, self.valid_mask)

    def take_rows(self, order: Sequence[int]) -> "CohortFeatureTable":
        order = np.asarray(order)
        return CohortFeatureTable(
            tuple(self.participant_ids[i] for i in order),
            self.labels[order],
            self.features[order],
            self.feature_names,
            self.valid_mask[order],
        )

    @staticmethod
    def concat(tables: Sequence["CohortFeatureTable"], prefixes: Sequence[str] | None = None) -> "CohortFeatureTable":
        """Join tables column-wise; rows must match exactly."""
        first = tables[0]
        for t in tables[1:]:
            if t.participant_ids != first.participant_ids or not np.array_equal(t.labels, first.labels):
                raise DataError("cannot concatenate feature tables over different participants")
        names = []
        for i, t in enumerate(tables):
            p = "" if prefixes is None else prefixes[i]
            names.extend(p + n for n in t.feature_names)
        return CohortFeatureTable(
            first.participant_ids,
            first.labels,
            np.hstack([t.features for t in tables]),
            names,
            np.hstack([t.valid_mask for t in tables]),
        )


# ---------------------------------------------------------------------------
# trajectory files


def _sniff_delimiter(line: str) -> str | None:
    if "," in line:
        return ","
    if "\t" in line:
        return "\t"
    if ";" in line:
        return ";"
    return None  # whitespace


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _parse_cell(cell: str) -> tuple[float, bool]:
    """Return (value, warned)."""
    s = cell.strip()
    if not s:
        return math.nan, True
    try:
        v = float(s)
    except ValueError:
        return math.nan, True
    if math.isinf(v):
        return math.nan, True
    return v, False


def parse_trajectory_text(text: str, participant_id: str = "", expected_channels: int | None = None) -> TrajectoryMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{participant_id}: empty trajectory file")
    delim = _sniff_delimiter(lines[0])

    def split(ln):
        return ln.split(delim) if delim else ln.split()

    first = split(lines[0])
    nonempty = [c for c in first if c.strip()]
    if nonempty and not any(_is_number(c) for c in nonempty):
        lines = lines[1:]

    rows = [split(ln) for ln in lines]
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        bad = next(i for i, r in enumerate(rows) if len(r) != len(rows[0]))
        raise DataError(f"{participant_id}: inconsistent row widths (row {bad + 1} has {len(rows[bad])} cells, expected {len(rows[0])})")
    if len(rows) < 2:
        raise DataError(f"{participant_id}: fewer than 2 frames")
    width = len(rows[0])
    if expected_channels is not None and width != expected_channels:
        raise DataError(f"{participant_id}: expected {expected_channels} channels, found {width}")

    warnings = 0
    try:
        values = np.array(rows, dtype=np.float64)
        if np.isinf(values).any():
            raise ValueError
    except ValueError:
        values = np.empty((len(rows), width))
        for i, r in enumerate(rows):
            for j, c in enumerate(r):
                values[i, j], w = _parse_cell(c)
                warnings += w
    if warnings:
        log.warning("%s: %d empty or non-numeric cells read as NaN", participant_id, warnings)
    return TrajectoryMatrix(participant_id, values, parse_warnings=warnings)


def load_trajectory(path, expected_channels: int | None = None, participant_id: str | None = None) -> TrajectoryMatrix:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"trajectory file not found: {path}")
    pid = participant_id if participant_id is not None else path.stem
    text = path.read_text(encoding="utf-8")
    return parse_trajectory_text(text, pid, expected_channels)


def format_trajectory(traj: TrajectoryMatrix) -> str:
    """Serialise with a ``ch1..chC`` header; values use 17 significant digits."""
    buf = io.StringIO()
    header = ",".join(f"ch{c + 1}" for c in range(traj.channel_count))
    np.savetxt(buf, traj.values, fmt="%.17g", delimiter=",", header=header, comments="")
    return buf.getvalue().replace("nan", "NaN")


def write_trajectory(traj: TrajectoryMatrix, path) -> None:
    Path(path).write_text(format_trajectory(traj), encoding="utf-8")


# ---------------------------------------------------------------------------
# manifests


def read_manifest_rows(path) -> list[tuple[str, str, int]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty manifest") from None
        if tuple(header) != MANIFEST_HEADER:
            raise DataError(f"{path}: manifest header must be {','.join(MANIFEST_HEADER)}, got {','.join(header)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or not "".join(rec).strip():
                continue
            if len(rec) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(rec)}")
            pid, rel, lab = (s.strip() for s in rec)
            if lab not in ("0", "1"):
                raise DataError(f"{path}:{lineno}: label must be 0 or 1, got {lab!r}")
            rows.append((pid, rel, int(lab)))
    ids = [r[0] for r in rows]
    dup = {p for p in ids if ids.count(p) > 1}
    if dup:
        raise DataError(f"{path}: duplicate participant_id {sorted(dup)[0]!r}")
    return rows


def load_manifest(path, data_root=None, expected_channels: int | None = None, threads: int = 1) -> Cohort:
    """Load every trajectory listed in the manifest, preserving row order."""
    rows = read_manifest_rows(path)
    root = Path(data_root) if data_root is not None else Path(path).parent

    def load(row):
        pid, rel, _ = row
        return load_trajectory(root / rel, expected_channels, participant_id=pid)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            trajs = list(ex.map(load, rows))
    else:
        trajs = [load(r) for r in rows]
    return Cohort(tuple((t, LabelRecord(r[0], r[2])) for t, r in zip(trajs, rows)))


def write_cohort(cohort: Cohort, out_dir, subdir: str = "trajectories") -> Path:
    """Write trajectories plus ``manifest.csv`` under ``out_dir``; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / subdir).mkdir(parents=True, exist_ok=True)
    lines = [",".join(MANIFEST_HEADER)]
    for traj, lab in cohort.members:
        rel = f"{subdir}/{traj.participant_id}.csv"
        write_trajectory(traj, out_dir / rel)
        lines.append(f"{traj.participant_id},{rel},{lab.label}")
    manifest = out_dir / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


# ---------------------------------------------------------------------------


def subsample_frames(traj: TrajectoryMatrix, max_frames: int = DEFAULT_MAX_FRAMES) -> TrajectoryMatrix:
    """Uniform-stride subsample keeping frame 0; no-op when already short enough."""
    if max_frames < 2:
        raise ValueError("max_frames must be >= 2")
    T = traj.frame_count
    if T <= max_frames:
        return traj
    stride = -(-T // max_frames)
    return TrajectoryMatrix(traj.participant_id, traj.values[::stride], traj.parse_warnings)


def finite_subsequence(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[np.isfinite(x)]
