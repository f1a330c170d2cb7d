from .axis import axis_feature_values, compute_axis_features
from .catalog import (
    AXES,
    CATALOG,
    FEATURE_NAMES,
    FeatureDescriptor,
    axis_descriptors,
    fused_descriptors,
)
from .extract import (
    FeatureMatrix,
    FeatureVector,
    compute_window_features,
    extract_windows,
    fuse,
    matrix_from_vectors,
    read_matrix_csv,
    write_matrix_csv,
)
from .normalize import NormalizerState, apply_normalizer, fit_normalizer
from .relieff import (
    RankedFeatures,
    SelectionConfig,
    read_ranking_csv,
    relieff_rank,
    relieff_scores,
    select_top,
    write_ranking_csv,
)

__all__ = [
    "AXES",
    "CATALOG",
    "FEATURE_NAMES",
    "FeatureDescriptor",
    "FeatureMatrix",
    "FeatureVector",
    "NormalizerState",
    "RankedFeatures",
    "SelectionConfig",
    "apply_normalizer",
    "axis_descriptors",
    "axis_feature_values",
    "compute_axis_features",
    "compute_window_features",
    "extract_windows",
    "fit_normalizer",
    "fuse",
    "fused_descriptors",
    "matrix_from_vectors",
    "read_matrix_csv",
    "read_ranking_csv",
    "relieff_rank",
    "relieff_scores",
    "select_top",
    "write_matrix_csv",
    "write_ranking_csv",
]
