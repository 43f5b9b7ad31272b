"""Recurrence-based nonlinear biomarkers from frame-level vocal trajectories,
with a cross-validated logistic-regression evaluation harness."""

__version__ = "0.1.0"

from .data import (  # noqa: E402
    Cohort,
    CohortFeatureTable,
    DataError,
    LabelRecord,
    TrajectoryMatrix,
    load_manifest,
    load_trajectory,
    subsample_frames,
    write_cohort,
)
from .rqa import RecurrenceParams, determinism_proxy, extract_recurrence_features, recurrence_rate  # noqa: E402
from .baselines import FAMILIES, extract_baseline_features, extract_features  # noqa: E402
from .pipeline import PipelineConfig, fit_pipeline, score_pipeline  # noqa: E402
from .evaluation import (  # noqa: E402
    CVConfig,
    ConfigError,
    auc_roc,
    bootstrap_ci,
    permutation_test,
    rank_channels,
    run_cv,
)
from .synth import SynthConfig, generate_cohort  # noqa: E402
