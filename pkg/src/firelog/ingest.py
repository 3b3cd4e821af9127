"""Log ingestion: pluggable parsers with CSV as the reference implementation.

CSV parsing is two-pass: schema inference over a sample, then typed cell
conversion. Lines whose *required* cells (timestamp, source/destination IP,
action) fail to parse are rejected with a line-numbered report; optional
cells that fail simply become null. A parse aborts only when more than
``reject_threshold`` of the data lines were rejected, which almost always
means a wrong delimiter.
"""

from __future__ import annotations

import csv
import io
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Any, Callable, Mapping, Sequence

from .errors import (
    DuplicateParserError,
    EmptySampleError,
    MalformedInputError,
    MissingHeaderError,
    UnmappedRequiredColumnError,
    UnsupportedFormatError,
)
from .table import (
    REQUIRED_ROLES,
    ROLE_ACTION,
    ROLE_DESTINATION_IP,
    ROLE_SOURCE_IP,
    ROLE_TIMESTAMP,
    AttributeKind,
    Column,
    LogTable,
    Schema,
    normalize_ip,
)

# "iso8601" is a pseudo-format handled by datetime.fromisoformat (with a
# trailing-Z fixup for Python 3.10); the rest are strptime patterns tried in
# order. Epoch formats ("epoch-s"/"epoch-ms") are opt-in because bare integer
# columns would otherwise be indistinguishable from ports or counters.
DEFAULT_TIMESTAMP_FORMATS: tuple[str, ...] = (
    "iso8601",
    "%Y-%m-%d %H:%M:%S",
    "%Y/%m/%d %H:%M:%S",
    "%d/%b/%Y:%H:%M:%S",
    "%m/%d/%Y %H:%M:%S",
)

# Header aliases used to auto-resolve the four required roles when the
# caller gives no explicit mapping. Keys are normalized header names.
_ROLE_ALIASES: dict[str, tuple[str, ...]] = {
    ROLE_TIMESTAMP: ("timestamp", "ts", "time", "datetime", "date-time", "date"),
    ROLE_SOURCE_IP: ("source-ip", "src", "source", "src-ip", "srcip",
                     "source-address", "src-addr", "src-address"),
    ROLE_DESTINATION_IP: ("destination-ip", "dst", "dest", "destination",
                          "dst-ip", "dstip", "dest-ip", "destination-address",
                          "dst-addr", "dest-address"),
    ROLE_ACTION: ("action", "act", "action-taken", "disposition", "verdict"),
}

_ROLE_KINDS: dict[str, AttributeKind] = {
    ROLE_TIMESTAMP: AttributeKind.TIMESTAMP,
    ROLE_SOURCE_IP: AttributeKind.IP_ADDRESS,
    ROLE_DESTINATION_IP: AttributeKind.IP_ADDRESS,
    ROLE_ACTION: AttributeKind.CATEGORICAL,
}


@dataclass(frozen=True)
class ParseConfig:
    delimiter: str = ","
    timestamp_formats: tuple[str, ...] = DEFAULT_TIMESTAMP_FORMATS
    column_kinds: Mapping[str, AttributeKind] = field(default_factory=dict)
    required_mapping: Mapping[str, str] = field(default_factory=dict)
    row_limit: int | None = None
    time_range: tuple[int, int] | None = None  # [start, end) epoch ms
    reject_threshold: float = 0.10
    sample_size: int = 200


@dataclass(frozen=True)
class ParseResult:
    table: LogTable
    rejections: tuple[tuple[int, str], ...] = ()

    def report(self) -> str:
        return "\n".join(f"line {n}: {reason}" for n, reason in self.rejections)


def _normalize_header(name: str) -> str:
    return name.strip().lower().replace("_", "-").replace(" ", "-")


def parse_timestamp(text: str, formats: Sequence[str]) -> int:
    """Parse ``text`` with the first matching format; returns epoch ms (UTC).
    Naive datetimes are taken as UTC. Raises ValueError if nothing matches."""
    text = text.strip()
    if not text:
        raise ValueError("empty timestamp")
    for fmt in formats:
        try:
            if fmt == "iso8601":
                iso = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
                dt = datetime.fromisoformat(iso)
            elif fmt == "epoch-s":
                return int(round(float(text) * 1000.0))
            elif fmt == "epoch-ms":
                return int(text)
            else:
                dt = datetime.strptime(text, fmt)
        except ValueError:
            continue
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp() * 1000)
    raise ValueError(f"unparseable timestamp: {text!r}")


def format_timestamp(ms: int) -> str:
    """Canonical ISO-8601 UTC form; milliseconds kept only when non-zero."""
    dt = datetime.fromtimestamp(ms // 1000, tz=timezone.utc)
    base = dt.strftime("%Y-%m-%dT%H:%M:%S")
    frac = ms % 1000
    return f"{base}.{frac:03d}Z" if frac else f"{base}Z"


def _classify_cell(text: str, formats: Sequence[str]) -> str:
    """First matching class per the inference priority:
    ip > timestamp > integer > real > categorical."""
    try:
        normalize_ip(text)
        return "ip"
    except ValueError:
        pass
    try:
        parse_timestamp(text, formats)
        return "timestamp"
    except ValueError:
        pass
    try:
        int(text)
        return "integer"
    except ValueError:
        pass
    try:
        value = float(text)
        if value == value and value not in (float("inf"), float("-inf")):
            return "real"
    except ValueError:
        pass
    return "categorical"


_CLASS_TO_KIND = {
    "ip": AttributeKind.IP_ADDRESS,
    "timestamp": AttributeKind.TIMESTAMP,
    "integer": AttributeKind.ORDINAL_NUMERIC,
    "real": AttributeKind.ORDINAL_NUMERIC,
    "categorical": AttributeKind.CATEGORICAL,
}
_CLASS_PRIORITY = ("ip", "timestamp", "integer", "real", "categorical")


def infer_schema(header: Sequence[str], sample_rows: Sequence[Sequence[str]],
                 config: ParseConfig | None = None) -> Schema:
    """Infer column kinds by plurality vote over non-null sample cells.

    Each cell votes for the first class it matches (ip > timestamp >
    integer > real > categorical); ties involving categorical break toward
    categorical, other ties toward the higher-priority class. Overrides in
    ``config.column_kinds`` win outright.
    """
    config = config or ParseConfig()
    if not sample_rows:
        raise EmptySampleError("schema inference needs at least one sample row")
    columns = []
    for i, name in enumerate(header):
        override = config.column_kinds.get(name)
        if override is not None:
            columns.append(Column(name, override))
            continue
        votes = {c: 0 for c in _CLASS_PRIORITY}
        seen = False
        for row in sample_rows:
            text = row[i].strip() if i < len(row) else ""
            if not text:
                continue
            seen = True
            votes[_classify_cell(text, config.timestamp_formats)] += 1
        if not seen:
            columns.append(Column(name, AttributeKind.CATEGORICAL))
            continue
        best = max(votes.values())
        tied = [c for c in _CLASS_PRIORITY if votes[c] == best]
        winner = "categorical" if "categorical" in tied else tied[0]
        columns.append(Column(name, _CLASS_TO_KIND[winner]))
    return Schema(columns)


def _resolve_required(header: Sequence[str], config: ParseConfig) -> dict[str, int]:
    """Map each required role to its header index, via the explicit mapping
    first and well-known aliases second."""
    normalized = {_normalize_header(h): i for i, h in enumerate(header)}
    exact = {h: i for i, h in enumerate(header)}
    resolved: dict[str, int] = {}
    for role in REQUIRED_ROLES:
        mapped = config.required_mapping.get(role)
        if mapped is not None:
            if mapped not in exact:
                raise UnmappedRequiredColumnError(
                    f"mapped column {mapped!r} for role {role!r} not in header")
            resolved[role] = exact[mapped]
            continue
        for alias in _ROLE_ALIASES[role]:
            if alias in normalized:
                resolved[role] = normalized[alias]
                break
        else:
            raise UnmappedRequiredColumnError(
                f"no mapping for required column {role!r}; "
                f"header is {list(header)}")
    return resolved


def _convert_cell(text: str, kind: AttributeKind,
                  formats: Sequence[str]) -> Any:
    """Typed value for a non-empty field; raises ValueError when the text
    does not fit the column kind."""
    if kind is AttributeKind.TIMESTAMP:
        return parse_timestamp(text, formats)
    if kind is AttributeKind.IP_ADDRESS:
        return normalize_ip(text)
    if kind is AttributeKind.ORDINAL_NUMERIC:
        try:
            return int(text)
        except ValueError:
            value = float(text)
            if value != value or value in (float("inf"), float("-inf")):
                raise ValueError(f"non-finite numeric: {text!r}")
            return value
    return text


def parse_csv(data: bytes | str, config: ParseConfig | None = None,
              provenance: str = "csv") -> ParseResult:
    """Parse an RFC-4180-style CSV with a mandatory header row.

    Row order is preserved exactly; the parser never reorders lines even
    when timestamps interleave.
    """
    config = config or ParseConfig()
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8-sig")
        except UnicodeDecodeError as exc:
            raise MalformedInputError(f"input is not UTF-8: {exc}") from None
    else:
        text = data
    reader = csv.reader(io.StringIO(text), delimiter=config.delimiter)
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeaderError("empty input: no header row") from None
    if not any(h.strip() for h in header):
        raise MissingHeaderError("blank header row")
    header = [h.strip() for h in header]

    raw_rows = list(reader)
    role_index = _resolve_required(header, config)

    if raw_rows:
        sample = raw_rows[:config.sample_size]
        inferred = infer_schema(header, sample, config)
        kinds = [c.kind for c in inferred.columns]
    else:
        kinds = [config.column_kinds.get(n, AttributeKind.CATEGORICAL)
                 for n in header]
    # role columns get their contractual kinds regardless of inference
    index_role = {i: role for role, i in role_index.items()}
    for i, role in index_role.items():
        kinds[i] = _ROLE_KINDS[role]
    schema = Schema([
        Column(name, kinds[i],
               required=i in index_role, role=index_role.get(i))
        for i, name in enumerate(header)
    ])

    ts_index = role_index[ROLE_TIMESTAMP]
    columns: list[list[Any]] = [[] for _ in header]
    rejections: list[tuple[int, str]] = []
    accepted = 0
    for line_offset, raw in enumerate(raw_rows):
        line_no = line_offset + 2  # header is line 1
        if len(raw) != len(header):
            rejections.append(
                (line_no, f"expected {len(header)} fields, got {len(raw)}"))
            continue
        cells: list[Any] = []
        reject_reason = None
        for i, field_text in enumerate(raw):
            field_text = field_text.strip()
            required = i in index_role
            if not field_text:
                if required:
                    reject_reason = f"empty required cell {header[i]!r}"
                    break
                cells.append(None)
                continue
            try:
                cells.append(_convert_cell(field_text, kinds[i],
                                           config.timestamp_formats))
            except ValueError as exc:
                if required:
                    reject_reason = f"malformed required cell {header[i]!r}: {exc}"
                    break
                cells.append(None)
        if reject_reason is not None:
            rejections.append((line_no, reject_reason))
            continue
        if config.time_range is not None:
            start, end = config.time_range
            if not (start <= cells[ts_index] < end):
                continue
        for i, value in enumerate(cells):
            columns[i].append(value)
        accepted += 1
        if config.row_limit is not None and accepted >= config.row_limit:
            break

    if raw_rows and len(rejections) > config.reject_threshold * len(raw_rows):
        report = "\n".join(f"line {n}: {r}" for n, r in rejections[:20])
        raise MalformedInputError(
            f"{len(rejections)} of {len(raw_rows)} lines rejected "
            f"(>{config.reject_threshold:.0%}); wrong delimiter?\n{report}")

    table = LogTable(schema, columns, provenance=provenance)
    return ParseResult(table, tuple(rejections))


def serialize_csv(table: LogTable, delimiter: str = ",") -> bytes:
    """Canonical CSV form: nulls are empty fields, timestamps ISO-8601 UTC,
    floats shortest round-trip repr. parse(serialize(t)) reproduces every
    cell when given the original column kinds."""
    out = io.StringIO()
    writer = csv.writer(out, delimiter=delimiter, lineterminator="\n")
    writer.writerow(table.schema.names)
    kinds = [c.kind for c in table.schema.columns]
    for row in table.rows():
        record = []
        for value, kind in zip(row, kinds):
            if value is None:
                record.append("")
            elif kind is AttributeKind.TIMESTAMP:
                record.append(format_timestamp(value))
            elif kind is AttributeKind.ORDINAL_NUMERIC:
                record.append(repr(value) if isinstance(value, float) else str(value))
            else:
                record.append(value)
        writer.writerow(record)
    return out.getvalue().encode("utf-8")


def roundtrip_config(table: LogTable, base: ParseConfig | None = None) -> ParseConfig:
    """Config that re-parses ``serialize_csv(table)`` into an identical table:
    kinds pinned from the schema, roles pinned from the role tags."""
    base = base or ParseConfig()
    kinds = {c.name: c.kind for c in table.schema.columns}
    mapping = {c.role: c.name for c in table.schema.columns if c.role}
    return replace(base, column_kinds=kinds, required_mapping=mapping)


# --- parser plugins ----------------------------------------------------------

@dataclass(frozen=True)
class ParserPlugin:
    """A log format handler. ``accepts`` sees the first bytes of the file;
    ``parse`` must be deterministic for a given (bytes, config) pair."""
    name: str
    accepts: Callable[[bytes], bool]
    parse: Callable[[bytes, ParseConfig], ParseResult]


def _csv_accepts(signature: bytes) -> bool:
    if b"\x00" in signature:
        return False
    try:
        signature.decode("utf-8")
    except UnicodeDecodeError:
        # a multi-byte sequence cut off at the chunk boundary is fine
        try:
            signature[:-4].decode("utf-8")
        except UnicodeDecodeError:
            return False
    return True


_PCAP_MAGICS = (b"\xa1\xb2\xc3\xd4", b"\xd4\xc3\xb2\xa1",
                b"\xa1\xb2\x3c\x4d", b"\x4d\x3c\xb2\xa1",
                b"\x0a\x0d\x0d\x0a")


def _pcap_accepts(signature: bytes) -> bool:
    return any(signature.startswith(m) for m in _PCAP_MAGICS)


def _pcap_parse(data: bytes, config: ParseConfig) -> ParseResult:
    raise UnsupportedFormatError(
        "pcap input recognized but packet decoding is not implemented; "
        "convert the capture to CSV first")


class ParserRegistry:
    """Ordered plugin registry; CSV is always first. Registration is
    serialized, lookup is read-only and safe from any thread."""

    def __init__(self):
        self._lock = threading.Lock()
        self._plugins: list[ParserPlugin] = []
        self.register(ParserPlugin("csv", _csv_accepts,
                                   lambda d, c: parse_csv(d, c)))
        self.register(ParserPlugin("pcap", _pcap_accepts, _pcap_parse))

    def register(self, plugin: ParserPlugin) -> None:
        with self._lock:
            if any(p.name == plugin.name for p in self._plugins):
                raise DuplicateParserError(
                    f"parser {plugin.name!r} already registered")
            self._plugins.append(plugin)

    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self._plugins)

    def route(self, data: bytes) -> ParserPlugin:
        signature = data[:4096]
        for plugin in self._plugins:
            if plugin.accepts(signature):
                return plugin
        # unknown signature: fall back to a CSV attempt and surface its errors
        return self._plugins[0]

    def parse(self, data: bytes, config: ParseConfig | None = None) -> ParseResult:
        return self.route(data).parse(data, config or ParseConfig())


_default_registry = ParserRegistry()


def default_registry() -> ParserRegistry:
    return _default_registry


def register_parser(plugin: ParserPlugin) -> None:
    _default_registry.register(plugin)


def load_bytes(data: bytes, config: ParseConfig | None = None) -> ParseResult:
    return _default_registry.parse(data, config)


def load_path(path, config: ParseConfig | None = None) -> ParseResult:
    with open(path, "rb") as fh:
        data = fh.read()
    result = _default_registry.parse(data, config)
    return ParseResult(result.table.with_provenance(str(path)),
                       result.rejections)
