"""Pull scored-above-threshold rows out into a new table."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import LengthMismatchError
from ..table import LogTable
from .lof import LofScores


def threshold_extract(table: LogTable, scores: LofScores | Sequence[float] | np.ndarray,
                      threshold: float) -> LogTable:
    """New table with exactly the rows whose score exceeds ``threshold``,
    original order preserved."""
    values = scores.scores if isinstance(scores, LofScores) else np.asarray(scores, dtype=np.float64)
    if values.shape[0] != table.num_rows:
        raise LengthMismatchError(
            f"{values.shape[0]} scores for {table.num_rows} rows")
    keep = [i for i in range(table.num_rows) if values[i] > threshold]
    provenance = f"{table.provenance}#extract(score>{threshold:g})"
    return table.select_rows(keep, provenance=provenance)
