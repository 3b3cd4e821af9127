"""Numeric algorithms behind the anomaly-detection nodes."""

from .extract import threshold_extract
from .features import (
    ColumnEncoding,
    FeatureMatrix,
    encodable_attributes,
    encode_features,
)
from .lof import (
    ACTIVE_BACKEND,
    DEFAULT_K,
    DEFAULT_THRESHOLD,
    LofParams,
    LofScores,
    clip_k,
    lof,
    lof_scores,
)
from .pca import Projection2D, pca_2d

__all__ = [
    "ACTIVE_BACKEND",
    "ColumnEncoding",
    "DEFAULT_K",
    "DEFAULT_THRESHOLD",
    "FeatureMatrix",
    "LofParams",
    "LofScores",
    "Projection2D",
    "clip_k",
    "encodable_attributes",
    "encode_features",
    "lof",
    "lof_scores",
    "pca_2d",
    "threshold_extract",
]
