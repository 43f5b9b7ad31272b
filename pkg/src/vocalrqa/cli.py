"""``vocalrqa`` command line.

Exit codes: 0 success, 1 usage/configuration error, 2 data/validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import report
from .baselines import ENTROPY_MEASURE, FAMILIES, HURST_ESTIMATOR, extract_features
from .data import DEFAULT_MAX_FRAMES, DataError, load_manifest, write_cohort
from .evaluation import CVConfig, ConfigError, bootstrap_ci, permutation_test, rank_channels, run_cv
from .pipeline import PipelineConfig
from .rqa import RecurrenceParams
from .synth import SynthConfig, generate_cohort

log = logging.getLogger("vocalrqa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _nonneg_int(s):
    v = int(s)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {s}")
    return v


def _add_input(p, family_default="recurrence"):
    g = p.add_argument_group("input (either --features, or --manifest with --family)")
    g.add_argument("--features", help="feature table TSV written by 'extract'")
    g.add_argument("--manifest", help="CSV with participant_id,path,label")
    g.add_argument("--data-root", help="directory trajectory paths are relative to (default: manifest directory)")
    g.add_argument("--family", default=family_default, choices=FAMILIES + ("all",))
    g.add_argument("--epsilon-factor", type=float, default=0.2, help="recurrence threshold in channel std units (default 0.2)")
    g.add_argument("--max-frames", type=_positive_int, default=DEFAULT_MAX_FRAMES, help="frame cap for O(T^2) measures (default 2000)")


def _add_model(p):
    p.add_argument("--top-k", type=_positive_int, default=15, help="ANOVA-selected features per fold (default 15)")
    p.add_argument("--l2", type=float, default=1.0, help="L2 strength (default 1.0)")
    p.add_argument("--folds", type=_positive_int, default=5, help="stratified CV folds (default 5)")
    p.add_argument("--seed", type=_nonneg_int, default=42, help="master seed (default 42)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vocalrqa", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic cohort (manifest + trajectories)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n-per-class", type=_positive_int, nargs=2, default=(100, 42), metavar=("N0", "N1"))
    p.add_argument("--frames", type=_positive_int, default=1500)
    p.add_argument("--channels", type=_positive_int, default=74)
    p.add_argument("--n-informative", type=_nonneg_int, default=10)
    p.add_argument("--ar-shift", type=float, default=0.25)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--missing-rate", type=float, default=0.0)
    p.add_argument("--seed", type=_nonneg_int, default=42)

    p = sub.add_parser("extract", help="compute a feature table from a manifest")
    _add_input(p)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--out", required=True, help="feature table TSV; parameters go to <out>.json")

    p = sub.add_parser("evaluate", help="cross-validated AUC report")
    _add_input(p)
    _add_model(p)
    p.add_argument("--permutations", type=_nonneg_int, default=1000, help="label permutations, 0 to skip (default 1000)")
    p.add_argument("--resamples", type=_nonneg_int, default=2000, help="bootstrap resamples, 0 to skip (default 2000)")
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--out", help="report JSON (default stdout)")
    p.add_argument("--svg", help="write ROC curve of pooled held-out scores here")

    p = sub.add_parser("permtest", help="label-permutation test of the mean fold AUC")
    _add_input(p)
    _add_model(p)
    p.add_argument("--permutations", type=int, default=1000)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--out", help="result JSON (default stdout)")
    p.add_argument("--svg", help="write null-distribution histogram here")

    p = sub.add_parser("bootstrap", help="bootstrap CI of the pooled AUC in an evaluation report")
    p.add_argument("--report", required=True, help="JSON written by 'evaluate'")
    p.add_argument("--resamples", type=int, default=2000)
    p.add_argument("--seed", type=_nonneg_int, default=42)
    p.add_argument("--out", help="result JSON (default stdout)")

    p = sub.add_parser("rank-channels", help="per-feature ANOVA F ranking")
    _add_input(p)
    p.add_argument("--threads", type=_positive_int, default=1)
    p.add_argument("--out", help="TSV (default stdout)")
    return parser


# ---------------------------------------------------------------------------


def _recurrence_params(args) -> RecurrenceParams:
    return RecurrenceParams(epsilon_factor=args.epsilon_factor, max_frames=args.max_frames)


def _load_table(args):
    if args.features and args.manifest:
        raise UsageError("give either --features or --manifest, not both")
    if args.features:
        return report.read_feature_table(args.features), {"features": args.features}
    if not args.manifest:
        raise UsageError("an input is required: --features or --manifest")
    params = _recurrence_params(args)
    cohort = load_manifest(args.manifest, args.data_root, threads=getattr(args, "threads", 1))
    table = extract_features(cohort, args.family, params, threads=getattr(args, "threads", 1))
    echo = {
        "manifest": args.manifest,
        "data_root": args.data_root,
        "family": args.family,
        "epsilon_factor": params.epsilon_factor,
        "max_frames": params.max_frames,
    }
    return table, echo


def _model_config(args, extra: dict) -> tuple[PipelineConfig, CVConfig, dict]:
    pcfg = PipelineConfig(k=args.top_k, l2_strength=args.l2)
    cvcfg = CVConfig(n_folds=args.folds, shuffle=True, seed=args.seed)
    echo = dict(extra)
    echo.update(
        top_k=pcfg.k,
        l2=pcfg.l2_strength,
        folds=cvcfg.n_folds,
        shuffle=cvcfg.shuffle,
        seed=args.seed,
        hurst_estimator=HURST_ESTIMATOR,
        entropy_measure=ENTROPY_MEASURE,
        permutation_statistic="mean_fold_auc",
        software=report.software_block(),
    )
    return pcfg, cvcfg, echo


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_per_class=tuple(args.n_per_class),
        frames=args.frames,
        channels=args.channels,
        n_informative=args.n_informative,
        ar_shift=args.ar_shift,
        noise_std=args.noise_std,
        seed=args.seed,
        missing_rate=args.missing_rate,
    )
    cohort = generate_cohort(cfg)
    manifest = write_cohort(cohort, args.out)
    y = cohort.labels
    print(
        f"wrote {len(cohort)} participants ({int((y == 0).sum())} class 0, {int((y == 1).sum())} class 1), "
        f"{cfg.channels} channels x {cfg.frames} frames; manifest {manifest}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_extract(args) -> int:
    if not args.manifest:
        raise UsageError("extract needs --manifest")
    args.features = None
    table, echo = _load_table(args)
    report.write_feature_table(table, args.out)
    echo.update(
        schema_version=report.SCHEMA_VERSION,
        n_participants=table.shape[0],
        n_features=table.shape[1],
        n_invalid_cells=int((~table.valid_mask).sum()),
        hurst_estimator=HURST_ESTIMATOR,
        entropy_measure=ENTROPY_MEASURE,
        software=report.software_block(),
    )
    report.write_json(echo, str(args.out) + ".json")
    print(f"wrote {table.shape[0]} x {table.shape[1]} feature table to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    started = time.time()
    table, echo = _load_table(args)
    pcfg, cvcfg, echo = _model_config(args, echo)
    echo.update(permutations=args.permutations, resamples=args.resamples)
    cvcfg.validate(table.labels)
    cv = run_cv(table, pcfg, cvcfg)
    perm = None
    if args.permutations > 0:
        perm = permutation_test(table, pcfg, cvcfg, m=args.permutations, seed=args.seed, threads=args.threads, observed=cv.mean_auc)
    boot = bootstrap_ci(cv.pooled_scores, cv.pooled_labels, args.resamples, args.seed) if args.resamples > 0 else None
    doc = report.eval_report(
        {"command": "evaluate", **echo},
        cv,
        table.participant_ids,
        perm,
        boot,
        rank_channels(table),
        report.timestamp_block(started, time.time()),
    )
    _emit(report.dumps(doc), args.out)
    if args.svg:
        Path(args.svg).write_text(report.roc_svg(cv.pooled_scores, cv.pooled_labels, cv.pooled_auc), encoding="utf-8")
    print(f"mean fold AUC {cv.mean_auc:.3f}, pooled AUC {cv.pooled_auc:.3f}", file=sys.stderr)
    return EXIT_OK


def cmd_permtest(args) -> int:
    if args.permutations < 1:
        raise UsageError("--permutations must be >= 1")
    started = time.time()
    table, echo = _load_table(args)
    pcfg, cvcfg, echo = _model_config(args, echo)
    echo.update(permutations=args.permutations)
    cvcfg.validate(table.labels)
    perm = permutation_test(table, pcfg, cvcfg, m=args.permutations, seed=args.seed, threads=args.threads)
    doc = {
        "schema_version": report.SCHEMA_VERSION,
        "config": {"command": "permtest", **echo},
        "permutation": report.permutation_block(perm, include_null=True),
        "timestamp": report.timestamp_block(started, time.time()),
    }
    _emit(report.dumps(doc), args.out)
    if args.svg:
        Path(args.svg).write_text(report.histogram_svg(perm.null_scores, perm.observed), encoding="utf-8")
    print(f"observed {perm.observed:.3f}, b={perm.b}, m={perm.m}, p={perm.p:.4f}", file=sys.stderr)
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    if args.resamples < 1:
        raise UsageError("--resamples must be >= 1")
    started = time.time()
    path = Path(args.report)
    if not path.is_file():
        raise DataError(f"report not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None
    scores, labels = report.pooled_from_report(doc)
    boot = bootstrap_ci(scores, labels, args.resamples, args.seed)
    out = {
        "schema_version": report.SCHEMA_VERSION,
        "config": {"command": "bootstrap", "report": str(args.report), "resamples": args.resamples, "seed": args.seed, "software": report.software_block()},
        "bootstrap": report.bootstrap_block(boot),
        "timestamp": report.timestamp_block(started, time.time()),
    }
    _emit(report.dumps(out), args.out)
    print(f"AUC {boot.point_auc:.3f}, 95% CI [{boot.ci_low:.3f}, {boot.ci_high:.3f}]", file=sys.stderr)
    return EXIT_OK


def cmd_rank_channels(args) -> int:
    table, _ = _load_table(args)
    _emit(report.format_ranking(rank_channels(table)), args.out)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "extract": cmd_extract,
    "evaluate": cmd_evaluate,
    "permtest": cmd_permtest,
    "bootstrap": cmd_bootstrap,
    "rank-channels": cmd_rank_channels,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, or a usage error already reported by the parser
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(over="ignore", under="ignore"):
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"vocalrqa: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"vocalrqa: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"vocalrqa: I/O error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"vocalrqa: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError) as exc:
        print(f"vocalrqa: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
