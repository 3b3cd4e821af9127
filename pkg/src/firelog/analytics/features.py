"""Turn selected log columns into a dense numeric matrix.

Numeric columns (ordinal and timestamp) are z-score normalized with the
population standard deviation; constant columns become all-zeros. Everything
else is frequency-encoded: each value maps to its relative frequency among
the column's rows, which keeps the dimensionality flat even for logs with
hundreds of sparse attributes. Nulls resolve to the column mean (numeric)
or 0 (frequency), so the matrix never contains NaN or infinity.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Any, Mapping, Sequence

import numpy as np

from ..errors import EmptyTableError, NoAttributesSelectedError
from ..table import AttributeKind, LogTable

_NUMERIC_KINDS = (AttributeKind.ORDINAL_NUMERIC, AttributeKind.TIMESTAMP)


@dataclass(frozen=True)
class ColumnEncoding:
    name: str
    method: str  # "zscore" | "frequency"
    mean: float = 0.0
    std: float = 0.0
    frequencies: Mapping[Any, float] | None = None


@dataclass(frozen=True)
class FeatureMatrix:
    points: np.ndarray  # (n, d) float64, C-contiguous
    row_map: tuple[int, ...]  # matrix row -> source table row
    encodings: tuple[ColumnEncoding, ...]

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.size == 0:
            raise EmptyTableError("feature matrix must be n>=1 by d>=1")
        if not np.isfinite(self.points).all():
            raise EmptyTableError("feature matrix contains non-finite values")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


def encodable_attributes(table: LogTable) -> list[str]:
    """Default attribute selection: everything except free-text columns."""
    return [c.name for c in table.schema.columns
            if c.kind is not AttributeKind.FREE_TEXT]


def _encode_numeric(cells: Sequence[Any], name: str) -> tuple[np.ndarray, ColumnEncoding]:
    observed = [float(v) for v in cells if v is not None]
    mean = float(np.mean(observed)) if observed else 0.0
    filled = np.array([float(v) if v is not None else mean for v in cells])
    std = float(np.std(filled))  # population sigma over the null-resolved column
    if std == 0.0:
        return np.zeros(len(cells)), ColumnEncoding(name, "zscore", mean, 0.0)
    return (filled - mean) / std, ColumnEncoding(name, "zscore", mean, std)


def _encode_frequency(cells: Sequence[Any], name: str) -> tuple[np.ndarray, ColumnEncoding]:
    n = len(cells)
    counts = Counter(v for v in cells if v is not None)
    freqs = {v: c / n for v, c in counts.items()}
    out = np.array([freqs[v] if v is not None else 0.0 for v in cells])
    return out, ColumnEncoding(name, "frequency", frequencies=freqs)


def encode_features(table: LogTable, attributes: Sequence[str] | None = None) -> FeatureMatrix:
    """Encode ``attributes`` (default: all non-free-text columns) into an
    n x d float matrix with a total row map back into the table."""
    if table.num_rows == 0:
        raise EmptyTableError("cannot encode an empty table")
    names = list(attributes) if attributes is not None else encodable_attributes(table)
    if not names:
        raise NoAttributesSelectedError("no attributes selected for encoding")
    columns = []
    encodings = []
    for name in names:
        kind = table.schema.column(name).kind
        cells = table.column(name)
        if kind in _NUMERIC_KINDS:
            values, enc = _encode_numeric(cells, name)
        else:
            values, enc = _encode_frequency(cells, name)
        columns.append(values)
        encodings.append(enc)
    points = np.ascontiguousarray(np.column_stack(columns), dtype=np.float64)
    return FeatureMatrix(points, tuple(range(table.num_rows)), tuple(encodings))
