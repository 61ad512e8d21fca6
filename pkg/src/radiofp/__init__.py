"""radiofp: vehicle classification from multi-link RSSI radio fingerprints.

A self-contained toolkit around 9-link x 800-sample RSSI passage records:
a seeded synthetic generator, raw/reduced feature pipelines, natively
implemented linear and RBF-kernel SVMs, random forests, a from-scratch
convolutional network, DTW similarity analysis and a cross-validation
evaluation harness with a reproducible CLI.
"""

from .domain import (
    DIRECT_LINKS,
    N_LINKS,
    N_SAMPLES,
    CoarseClass,
    Dataset,
    FineClass,
    Fingerprint,
    coarse_of,
    load_dataset,
    save_dataset,
    segment_stream,
)
from .synthgen import DipProfile, GeneratorConfig, generate
from .features import (
    FeatureLayout,
    raw_features,
    reduced_features,
    standardize_apply,
    standardize_fit,
)
from .evaluation import (
    ConfusionMatrix,
    EvaluationReport,
    Pipeline,
    accuracy,
    accuracy_quotient,
    confusion,
    cross_validate,
    importance_report,
    kfold_split,
    link_ablation,
)
from .pipelines import make_pipeline
from .timewarp import dtw, similarity, standardized_dtw_matrix

__version__ = "0.1.0"

__all__ = [
    "CoarseClass",
    "ConfusionMatrix",
    "Dataset",
    "DipProfile",
    "DIRECT_LINKS",
    "EvaluationReport",
    "FeatureLayout",
    "FineClass",
    "Fingerprint",
    "GeneratorConfig",
    "N_LINKS",
    "N_SAMPLES",
    "Pipeline",
    "accuracy",
    "accuracy_quotient",
    "coarse_of",
    "confusion",
    "cross_validate",
    "dtw",
    "generate",
    "importance_report",
    "kfold_split",
    "link_ablation",
    "load_dataset",
    "make_pipeline",
    "raw_features",
    "reduced_features",
    "save_dataset",
    "segment_stream",
    "similarity",
    "standardize_apply",
    "standardize_fit",
    "standardized_dtw_matrix",
    "__version__",
]
