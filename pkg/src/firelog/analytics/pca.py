"""Two-component PCA with a deterministic sign convention.

Computed via SVD of the centered data (never via the covariance matrix, so
the test oracle's eigendecomposition stays an independent route). Each
component is flipped so that its largest-magnitude entry is positive, making
scatterplots reproducible across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InsufficientDimsError, InsufficientRowsError
from .features import FeatureMatrix


@dataclass(frozen=True)
class Projection2D:
    coords: np.ndarray  # (n, 2)
    components: np.ndarray  # (2, d), orthonormal rows
    explained_variance: tuple[float, float]  # descending


def pca_2d(matrix: FeatureMatrix | np.ndarray) -> Projection2D:
    points = matrix.points if isinstance(matrix, FeatureMatrix) else np.asarray(matrix, dtype=np.float64)
    n, d = points.shape
    if n < 2:
        raise InsufficientRowsError(f"PCA needs at least 2 rows, got {n}")
    if d < 2:
        raise InsufficientDimsError(f"PCA needs at least 2 dimensions, got {d}")
    centered = points - points.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:2].copy()
    for row in components:
        pivot = int(np.argmax(np.abs(row)))
        if row[pivot] < 0:
            row *= -1.0
    variance = (singular[:2] ** 2) / (n - 1)
    if variance.shape[0] < 2:  # d >= 2 guarantees 2 singular values; keep guard
        variance = np.pad(variance, (0, 2 - variance.shape[0]))
    coords = centered @ components.T
    return Projection2D(coords, components,
                        (float(variance[0]), float(variance[1])))
