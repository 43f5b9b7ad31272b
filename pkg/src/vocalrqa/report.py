"""Report documents, feature-table TSV files and SVG figures.

Reports are JSON with sorted keys and repr-exact floats so that two runs with
the same inputs and seeds differ only in the ``timestamp`` block.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import __version__
from .data import CohortFeatureTable, DataError
from .evaluation import BootstrapResult, CVResult, PermutationResult

SCHEMA_VERSION = 1
NA = "NA"


def timestamp_block(started: float, finished: float) -> dict:
    return {
        "utc": _dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_seconds": round(finished - started, 3),
    }


def software_block() -> dict:
    return {"name": "vocalrqa", "version": __version__}


def permutation_block(perm: PermutationResult | None, include_null: bool = False) -> dict | None:
    if perm is None:
        return None
    out = {"observed": perm.observed, "b": perm.b, "m": perm.m, "p": perm.p, "statistic": perm.statistic}
    if include_null:
        out["null_scores"] = [float(v) for v in perm.null_scores]
    return out


def bootstrap_block(boot: BootstrapResult | None) -> dict | None:
    if boot is None:
        return None
    return {
        "point_auc": boot.point_auc,
        "ci_low": boot.ci_low,
        "ci_high": boot.ci_high,
        "n_resamples": boot.n_resamples,
        "seed": boot.seed,
        "percentiles": [2.5, 97.5],
    }


def ranking_block(ranking) -> list[dict]:
    return [{"feature": name, "F": F, "p": p} for name, F, p in ranking]


def eval_report(config: dict, cv: CVResult, participant_ids, perm=None, boot=None, ranking=(), timestamp=None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": config,
        "fold_aucs": [float(a) for a in cv.fold_aucs],
        "mean_auc": cv.mean_auc,
        "pooled_auc": cv.pooled_auc,
        "permutation": permutation_block(perm),
        "bootstrap": bootstrap_block(boot),
        "channel_ranking": ranking_block(ranking),
        "pooled": {
            "participant_ids": list(participant_ids),
            "labels": [int(v) for v in cv.pooled_labels],
            "scores": [float(v) for v in cv.pooled_scores],
            "folds": [int(v) for v in cv.fold_assignment],
        },
        "selected_features": [list(s) for s in cv.selected_features],
        "timestamp": timestamp,
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8")


def strip_timestamp(doc: dict) -> dict:
    return {k: v for k, v in doc.items() if k != "timestamp"}


def pooled_from_report(doc: dict) -> tuple[np.ndarray, np.ndarray]:
    """Pooled held-out scores and labels from an evaluation report."""
    try:
        pooled = doc["pooled"]
        scores = np.asarray(pooled["scores"], dtype=np.float64)
        labels = np.asarray(pooled["labels"], dtype=np.int64)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"report has no usable pooled scores/labels ({exc!r})") from None
    if scores.ndim != 1 or scores.shape != labels.shape or len(scores) == 0:
        raise DataError("pooled scores and labels must be equal-length non-empty lists")
    return scores, labels


# ---------------------------------------------------------------------------
# feature tables


def _fmt(v: float, ok: bool) -> str:
    return "%.17g" % v if ok else NA


def format_feature_table(table: CohortFeatureTable) -> str:
    lines = ["\t".join(("participant_id", "label") + table.feature_names)]
    for i, pid in enumerate(table.participant_ids):
        cells = [_fmt(v, ok) for v, ok in zip(table.features[i], table.valid_mask[i])]
        lines.append("\t".join([pid, str(int(table.labels[i]))] + cells))
    return "\n".join(lines) + "\n"


def write_feature_table(table: CohortFeatureTable, path) -> None:
    Path(path).write_text(format_feature_table(table), encoding="utf-8")


def read_feature_table(path) -> CohortFeatureTable:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"feature table not found: {path}")
    lines = [ln for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise DataError(f"{path}: empty feature table")
    header = lines[0].split("\t")
    if header[:2] != ["participant_id", "label"]:
        raise DataError(f"{path}: header must start with participant_id<TAB>label")
    names = header[2:]
    ids, labels, rows = [], [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.split("\t")
        if len(cells) != len(header):
            raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
        if cells[1] not in ("0", "1"):
            raise DataError(f"{path}:{lineno}: label must be 0 or 1")
        ids.append(cells[0])
        labels.append(int(cells[1]))
        try:
            rows.append([math.nan if c == NA else float(c) for c in cells[2:]])
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from None
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate participant_id")
    if len(set(labels)) < 2:
        raise DataError(f"{path}: feature table must contain both classes")
    X = np.array(rows, dtype=np.float64).reshape(len(ids), len(names))
    return CohortFeatureTable(tuple(ids), np.array(labels), X, tuple(names), np.isfinite(X))


def format_ranking(ranking) -> str:
    lines = ["feature\tF\tp"]
    lines += [f"{name}\t{F!r}\t{p!r}" for name, F, p in ranking]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# SVG

_W, _H, _PAD = 420, 420, 50


def roc_points(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    """(FPR, TPR) vertices, one per distinct score threshold."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(y == 1)[last]
    fp = np.cumsum(y == 0)[last]
    P, N = max(tp[-1], 1), max(fp[-1], 1)
    return np.r_[0.0, fp / N], np.r_[0.0, tp / P]


def _frame(title: str, xlabel: str, ylabel: str) -> list[str]:
    inner = _W - 2 * _PAD
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{_W / 2}" y="{_PAD / 2}" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{_PAD}" y="{_PAD}" width="{inner}" height="{inner}" fill="none" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>',
        f'<text x="14" y="{_H / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 14 {_H / 2})">{escape(ylabel)}</text>',
    ]


def roc_svg(scores, labels, auc: float, title: str = "ROC (pooled held-out scores)") -> str:
    fpr, tpr = roc_points(scores, labels)
    inner = _W - 2 * _PAD
    pts = " ".join(f"{_PAD + f * inner:.2f},{_PAD + (1 - t) * inner:.2f}" for f, t in zip(fpr, tpr))
    parts = _frame(f"{title}  AUC={auc:.3f}", "false positive rate", "true positive rate")
    parts += [
        f'<line x1="{_PAD}" y1="{_PAD + inner}" x2="{_PAD + inner}" y2="{_PAD}" stroke="grey" stroke-dasharray="4 4"/>',
        f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>',
        "</svg>",
    ]
    return "\n".join(parts) + "\n"


def histogram_svg(null_scores, observed: float, bins: int = 30, title: str = "Permutation null (mean fold AUC)") -> str:
    null = np.asarray(null_scores, dtype=np.float64)
    lo = min(float(null.min()), observed)
    hi = max(float(null.max()), observed)
    if hi <= lo:
        hi = lo + 1e-9
    counts, edges = np.histogram(null, bins=bins, range=(lo, hi))
    inner = _W - 2 * _PAD
    top = max(int(counts.max()), 1)
    parts = _frame(title, "score", "count")
    for c, e0, e1 in zip(counts, edges[:-1], edges[1:]):
        x = _PAD + (e0 - lo) / (hi - lo) * inner
        w = (e1 - e0) / (hi - lo) * inner
        h = c / top * inner
        parts.append(f'<rect x="{x:.2f}" y="{_PAD + inner - h:.2f}" width="{w:.2f}" height="{h:.2f}" fill="lightgrey" stroke="grey"/>')
    xo = _PAD + (observed - lo) / (hi - lo) * inner
    parts.append(f'<line x1="{xo:.2f}" y1="{_PAD}" x2="{xo:.2f}" y2="{_PAD + inner}" stroke="crimson" stroke-width="2"/>')
    parts.append(f'<text x="{xo:.2f}" y="{_PAD - 4}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="crimson">observed {observed:.3f}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
