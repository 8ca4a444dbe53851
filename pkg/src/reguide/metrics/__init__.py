"""Generation metrics and ablation experiments."""

from reguide.metrics.ablation import AblationReport, AblationSetup, run_ablations
from reguide.metrics.evaluation import (
    FeatureSet,
    MetricsReport,
    diversity,
    evaluate,
    extract_features,
    frechet_distance,
    mm_dist,
    r_precision,
    r_precision_curve,
)

__all__ = [
    "AblationReport",
    "AblationSetup",
    "FeatureSet",
    "MetricsReport",
    "diversity",
    "evaluate",
    "extract_features",
    "frechet_distance",
    "mm_dist",
    "r_precision",
    "r_precision_curve",
    "run_ablations",
]
