"""Columnar, immutable table of firewall log entries.

Cells are plain Python values typed by the column's :class:`AttributeKind`:

=================  =======================================
kind               cell value
=================  =======================================
timestamp          ``int`` epoch milliseconds (UTC)
ip-address         ``str`` normalized textual IP (v4 or v6)
categorical        ``str``
ordinal-numeric    ``int`` or ``float``
free-text          ``str``
=================  =======================================

A missing value is always ``None``; empty strings never act as a null
sentinel. Tables are immutable after construction: every transform builds a
new table.
"""

from __future__ import annotations

import hashlib
import ipaddress
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator, Sequence

from .errors import (
    MissingRequiredColumnError,
    TableInvariantError,
    UnknownColumnError,
)

# Roles of the four guaranteed attributes. Column *names* come from the input
# file; roles tie them to their meaning.
ROLE_TIMESTAMP = "timestamp"
ROLE_SOURCE_IP = "source-ip"
ROLE_DESTINATION_IP = "destination-ip"
ROLE_ACTION = "action"
REQUIRED_ROLES = (ROLE_TIMESTAMP, ROLE_SOURCE_IP, ROLE_DESTINATION_IP, ROLE_ACTION)


class AttributeKind(str, Enum):
    TIMESTAMP = "timestamp"
    IP_ADDRESS = "ip-address"
    CATEGORICAL = "categorical"
    ORDINAL_NUMERIC = "ordinal-numeric"
    FREE_TEXT = "free-text"


_CELL_TYPES: dict[AttributeKind, tuple[type, ...]] = {
    AttributeKind.TIMESTAMP: (int,),
    AttributeKind.IP_ADDRESS: (str,),
    AttributeKind.CATEGORICAL: (str,),
    AttributeKind.ORDINAL_NUMERIC: (int, float),
    AttributeKind.FREE_TEXT: (str,),
}


def normalize_ip(text: str) -> str:
    """Canonical lexical form used as the identity key for IPv4 and IPv6."""
    return str(ipaddress.ip_address(text.strip()))


@dataclass(frozen=True)
class Column:
    name: str
    kind: AttributeKind
    required: bool = False
    role: str | None = None


class Schema:
    """Ordered, uniquely named columns with optional role tags."""

    def __init__(self, columns: Sequence[Column]):
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise TableInvariantError(f"duplicate column names: {dupes}")
        self._columns = tuple(columns)
        self._index = {c.name: i for i, c in enumerate(self._columns)}
        self._role_index = {c.role: i for i, c in enumerate(self._columns) if c.role}

    @property
    def columns(self) -> tuple[Column, ...]:
        return self._columns

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self._columns)

    def __len__(self) -> int:
        return len(self._columns)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Schema) and self._columns == other._columns

    def __hash__(self) -> int:
        return hash(self._columns)

    def index_of(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise UnknownColumnError(f"unknown column: {name!r}") from None

    def column(self, name: str) -> Column:
        return self._columns[self.index_of(name)]

    def role_index(self, role: str) -> int | None:
        return self._role_index.get(role)

    def role_name(self, role: str) -> str | None:
        i = self._role_index.get(role)
        return None if i is None else self._columns[i].name


def _check_cell(value: Any, kind: AttributeKind) -> bool:
    if value is None:
        return True
    types = _CELL_TYPES[kind]
    # bool is an int subclass but never a valid cell
    return isinstance(value, types) and not isinstance(value, bool)


class LogTable:
    """Immutable columnar table. Construct via :meth:`from_columns` /
    :meth:`from_rows`; all transforms return new tables."""

    def __init__(self, schema: Schema, columns: Sequence[Sequence[Any]],
                 provenance: str = ""):
        if len(columns) != len(schema):
            raise TableInvariantError(
                f"{len(schema)} schema columns but {len(columns)} data columns")
        cols = tuple(tuple(c) for c in columns)
        n = len(cols[0]) if cols else 0
        for col, data in zip(schema.columns, cols):
            if len(data) != n:
                raise TableInvariantError(
                    f"column {col.name!r} has {len(data)} cells, expected {n}")
            for value in data:
                if not _check_cell(value, col.kind):
                    raise TableInvariantError(
                        f"column {col.name!r}: cell {value!r} does not match "
                        f"kind {col.kind.value}")
                if value is None and col.required:
                    raise TableInvariantError(
                        f"required column {col.name!r} contains a null")
        self._schema = schema
        self._columns = cols
        self._num_rows = n
        self._provenance = provenance

    @classmethod
    def from_columns(cls, schema: Schema, columns: Sequence[Sequence[Any]],
                     provenance: str = "") -> "LogTable":
        return cls(schema, columns, provenance)

    @classmethod
    def from_rows(cls, schema: Schema, rows: Sequence[Sequence[Any]],
                  provenance: str = "") -> "LogTable":
        cols: list[list[Any]] = [[] for _ in range(len(schema))]
        for r, row in enumerate(rows):
            if len(row) != len(schema):
                raise TableInvariantError(
                    f"row {r} has {len(row)} cells, expected {len(schema)}")
            for i, value in enumerate(row):
                cols[i].append(value)
        return cls(schema, cols, provenance)

    @property
    def schema(self) -> Schema:
        return self._schema

    @property
    def provenance(self) -> str:
        return self._provenance

    @property
    def num_rows(self) -> int:
        return self._num_rows

    def __len__(self) -> int:
        return self._num_rows

    def column(self, name: str) -> tuple[Any, ...]:
        """Cells of one column in row order."""
        return self._columns[self._schema.index_of(name)]

    def column_at(self, index: int) -> tuple[Any, ...]:
        return self._columns[index]

    def row(self, index: int) -> tuple[Any, ...]:
        return tuple(col[index] for col in self._columns)

    def rows(self) -> Iterator[tuple[Any, ...]]:
        for i in range(self._num_rows):
            yield self.row(i)

    def role_column(self, role: str) -> tuple[Any, ...]:
        i = self._schema.role_index(role)
        if i is None:
            raise MissingRequiredColumnError(f"no column fills role {role!r}")
        return self._columns[i]

    def with_provenance(self, provenance: str) -> "LogTable":
        return LogTable(self._schema, self._columns, provenance)

    def select_rows(self, indices: Sequence[int], provenance: str = "") -> "LogTable":
        cols = [[col[i] for i in indices] for col in self._columns]
        return LogTable(self._schema, cols, provenance or self._provenance)

    def as_edge_list(self) -> list[tuple[str, str, int]]:
        """One (source, destination, row-index) edge per row with both
        endpoints non-null, in row order — the log viewed as a network."""
        src = self.role_column(ROLE_SOURCE_IP)
        dst = self.role_column(ROLE_DESTINATION_IP)
        return [(s, d, i) for i, (s, d) in enumerate(zip(src, dst))
                if s is not None and d is not None]

    def content_hash(self) -> str:
        """Digest over schema and every cell; used to assert immutability."""
        h = hashlib.sha256()
        for col in self._schema.columns:
            h.update(repr((col.name, col.kind.value, col.required, col.role)).encode())
        for data in self._columns:
            for value in data:
                h.update(repr(value).encode())
            h.update(b"|")
        return h.hexdigest()

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, LogTable)
                and self._schema == other._schema
                and self._columns == other._columns)

    def __repr__(self) -> str:
        return (f"LogTable({self._num_rows} rows x {len(self._schema)} cols, "
                f"provenance={self._provenance!r})")
