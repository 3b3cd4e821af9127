"""Built-in node catalog.

A deliberately small core set: loading, wrangling, charts, the anomaly
pipeline (PCA scatterplot selection, LOF, extraction, export) and the
embedded cluster preview. New kinds register through
:func:`register_node_kind` and are immediately constructible.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..analytics import (
    DEFAULT_K,
    DEFAULT_THRESHOLD,
    clip_k,
    encode_features,
    lof_scores,
    pca_2d,
    threshold_extract,
)
from ..clustervis import ANOMALY_COLUMN, ClusterModel, canon_value, export_with_anomaly
from ..errors import (
    InvalidConfigError,
    LengthMismatchError,
    NodeEvaluationError,
)
from ..ingest import ParseConfig, load_path, parse_timestamp
from ..table import AttributeKind, Column, LogTable, Schema
from .graph import EvalContext, NodeKind, NodeRegistry, Port, PortType

_TABLE = Port(PortType.TABLE, "table")
_SCORES_OPT = Port(PortType.SCORE_VECTOR, "scores", required=False)
_MASK_OPT = Port(PortType.SELECTION_MASK, "selection", required=False)


def _require_type(config, key, types, label):
    value = config.get(key)
    if value is not None and not isinstance(value, types):
        raise InvalidConfigError(f"{key} must be {label}, got {value!r}")
    return value


# --- csv-loader ---------------------------------------------------------------

def _loader_parse_config(config: Mapping[str, Any]) -> ParseConfig:
    mapping = {}
    for role, key in (("timestamp", "map_timestamp"),
                      ("source-ip", "map_source"),
                      ("destination-ip", "map_destination"),
                      ("action", "map_action")):
        if config.get(key):
            mapping[role] = config[key]
    kinds = {name: AttributeKind(value)
             for name, value in (config.get("column_kinds") or {}).items()}
    time_range = config.get("time_range")
    return ParseConfig(
        delimiter=config.get("delimiter", ","),
        column_kinds=kinds,
        required_mapping=mapping,
        row_limit=config.get("row_limit"),
        time_range=tuple(time_range) if time_range else None,
    )


def _validate_loader(config: Mapping[str, Any]) -> None:
    delimiter = config.get("delimiter", ",")
    if not isinstance(delimiter, str) or len(delimiter) != 1:
        raise InvalidConfigError("delimiter must be a single character")
    row_limit = config.get("row_limit")
    if row_limit is not None and (not isinstance(row_limit, int) or row_limit < 0):
        raise InvalidConfigError("row_limit must be a non-negative integer")
    for key in ("path", "log"):
        _require_type(config, key, str, "a string")
    kinds = config.get("column_kinds") or {}
    for name, value in kinds.items():
        try:
            AttributeKind(value)
        except ValueError:
            raise InvalidConfigError(
                f"unknown attribute kind {value!r} for column {name!r}") from None


def _eval_loader(inputs, config, ctx: EvalContext):
    parse_config = _loader_parse_config(config)
    log_id = config.get("log")
    path = config.get("path")
    if log_id:
        if ctx.resolve_log is None:
            raise NodeEvaluationError("no log store available to resolve log ids")
        table = ctx.resolve_log(log_id)
        if parse_config.row_limit is not None or parse_config.time_range is not None:
            raise NodeEvaluationError(
                "row_limit/time_range require a path source, not a stored log")
        return (table,)
    if path:
        full = Path(path)
        if not full.is_absolute() and ctx.base_dir is not None:
            full = ctx.base_dir / full
        return (load_path(full, parse_config).table,)
    if ctx.default_table is not None:
        return (ctx.default_table,)
    raise NodeEvaluationError("csv-loader has no path, log id or default input")


# --- row wrangling -------------------------------------------------------------

_FILTER_OPS = ("==", "!=", "<", "<=", ">", ">=", "contains", "in",
               "is-null", "not-null")


def _validate_filter(config: Mapping[str, Any]) -> None:
    if not config.get("column"):
        raise InvalidConfigError("row-filter needs a column")
    op = config.get("op", "==")
    if op not in _FILTER_OPS:
        raise InvalidConfigError(f"unknown filter op {op!r}")
    if op in ("is-null", "not-null"):
        return
    if "value" not in config:
        raise InvalidConfigError(f"filter op {op!r} needs a value")
    if op == "in" and not isinstance(config["value"], (list, tuple)):
        raise InvalidConfigError("filter op 'in' needs a list value")


def _coerce(value: Any, kind: AttributeKind) -> Any:
    if value is None:
        return None
    if kind is AttributeKind.TIMESTAMP and isinstance(value, str):
        return parse_timestamp(value, ("iso8601",))
    if kind is AttributeKind.ORDINAL_NUMERIC and isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            return float(value)
    return value


def _eval_filter(inputs, config, ctx):
    table: LogTable = inputs[0]
    column = table.column(config["column"])
    kind = table.schema.column(config["column"]).kind
    op = config.get("op", "==")
    if op == "is-null":
        keep = [i for i, v in enumerate(column) if v is None]
    elif op == "not-null":
        keep = [i for i, v in enumerate(column) if v is not None]
    elif op == "in":
        targets = {_coerce(v, kind) for v in config["value"]}
        keep = [i for i, v in enumerate(column) if v is not None and v in targets]
    else:
        target = _coerce(config["value"], kind)
        tests = {
            "==": lambda v: v == target,
            "!=": lambda v: v != target,
            "<": lambda v: v < target,
            "<=": lambda v: v <= target,
            ">": lambda v: v > target,
            ">=": lambda v: v >= target,
            "contains": lambda v: isinstance(v, str) and str(target) in v,
        }
        test = tests[op]
        keep = [i for i, v in enumerate(column) if v is not None and test(v)]
    return (table.select_rows(keep, provenance=f"{table.provenance}#filter"),)


def _validate_columns_list(config: Mapping[str, Any]) -> None:
    columns = config.get("columns")
    if not isinstance(columns, (list, tuple)) or not columns:
        raise InvalidConfigError("column-select needs a non-empty column list")


def _eval_column_select(inputs, config, ctx):
    table: LogTable = inputs[0]
    names = list(config["columns"])
    schema = Schema([table.schema.column(n) for n in names])
    data = [table.column(n) for n in names]
    return (LogTable(schema, data, provenance=f"{table.provenance}#select"),)


_DERIVE_OPS = ("hour-of-day", "text-length", "sum", "ratio", "constant")


def _validate_derive(config: Mapping[str, Any]) -> None:
    if not config.get("name"):
        raise InvalidConfigError("derive-column needs a name")
    op = config.get("op")
    if op not in _DERIVE_OPS:
        raise InvalidConfigError(f"unknown derive op {op!r}")
    if op in ("hour-of-day", "text-length") and not config.get("source"):
        raise InvalidConfigError(f"derive op {op!r} needs a source column")
    if op in ("sum", "ratio") and not (config.get("left") and config.get("right")):
        raise InvalidConfigError(f"derive op {op!r} needs left and right columns")
    if op == "constant" and "value" not in config:
        raise InvalidConfigError("derive op 'constant' needs a value")


def _eval_derive(inputs, config, ctx):
    table: LogTable = inputs[0]
    name = config["name"]
    if name in table.schema:
        raise NodeEvaluationError(f"column {name!r} already exists")
    op = config["op"]
    if op == "hour-of-day":
        src = table.column(config["source"])
        cells = [None if v is None else int((v // 3_600_000) % 24) for v in src]
        kind = AttributeKind.ORDINAL_NUMERIC
    elif op == "text-length":
        src = table.column(config["source"])
        cells = [None if v is None else len(str(v)) for v in src]
        kind = AttributeKind.ORDINAL_NUMERIC
    elif op in ("sum", "ratio"):
        left = table.column(config["left"])
        right = table.column(config["right"])
        cells = []
        for a, b in zip(left, right):
            if a is None or b is None or (op == "ratio" and b == 0):
                cells.append(None)
            else:
                cells.append(a + b if op == "sum" else a / b)
        kind = AttributeKind.ORDINAL_NUMERIC
    else:  # constant
        value = config["value"]
        kind = (AttributeKind.ORDINAL_NUMERIC
                if isinstance(value, (int, float)) else AttributeKind.CATEGORICAL)
        cells = [value] * table.num_rows
    schema = Schema(list(table.schema.columns) + [Column(name, kind)])
    columns = [table.column_at(i) for i in range(len(table.schema))] + [cells]
    return (LogTable(schema, columns, provenance=f"{table.provenance}#derive"),)


_AGG_OPS = ("count", "sum", "mean", "min", "max")


def _validate_aggregate(config: Mapping[str, Any]) -> None:
    group_by = config.get("group_by")
    if not isinstance(group_by, (list, tuple)) or not group_by:
        raise InvalidConfigError("aggregate needs group_by columns")
    aggregations = config.get("aggregations") or []
    for agg in aggregations:
        if agg.get("op") not in _AGG_OPS:
            raise InvalidConfigError(f"unknown aggregation op {agg.get('op')!r}")
        if agg["op"] != "count" and not agg.get("column"):
            raise InvalidConfigError(f"aggregation {agg['op']!r} needs a column")


def _eval_aggregate(inputs, config, ctx):
    table: LogTable = inputs[0]
    group_names = list(config["group_by"])
    aggregations = list(config.get("aggregations") or [{"op": "count"}])
    key_columns = [table.column(n) for n in group_names]
    groups: dict[tuple, list[int]] = {}
    for i in range(table.num_rows):
        key = tuple(col[i] for col in key_columns)
        groups.setdefault(key, []).append(i)
    ordered = sorted(groups, key=lambda key: tuple(canon_value(v) for v in key))

    out_columns: list[Column] = [table.schema.column(n) for n in group_names]
    out_data: list[list[Any]] = [[key[j] for key in ordered]
                                 for j in range(len(group_names))]
    for agg in aggregations:
        op = agg["op"]
        label = agg.get("as") or (op if op == "count" else f"{op}_{agg['column']}")
        if op == "count":
            out_columns.append(Column(label, AttributeKind.ORDINAL_NUMERIC))
            out_data.append([len(groups[key]) for key in ordered])
            continue
        source = table.column(agg["column"])
        source_kind = table.schema.column(agg["column"]).kind
        kind = (source_kind if op in ("min", "max")
                else AttributeKind.ORDINAL_NUMERIC)
        cells = []
        for key in ordered:
            values = [source[i] for i in groups[key] if source[i] is not None]
            if not values:
                cells.append(None)
            elif op == "sum":
                cells.append(sum(values))
            elif op == "mean":
                cells.append(sum(values) / len(values))
            elif op == "min":
                cells.append(min(values))
            else:
                cells.append(max(values))
        out_columns.append(Column(label, kind))
        out_data.append(cells)
    schema = Schema(out_columns)
    return (LogTable(schema, out_data, provenance=f"{table.provenance}#aggregate"),)


def _validate_sort(config: Mapping[str, Any]) -> None:
    if not config.get("by"):
        raise InvalidConfigError("sort needs a 'by' column")


def _eval_sort(inputs, config, ctx):
    table: LogTable = inputs[0]
    column = table.column(config["by"])
    descending = bool(config.get("descending", False))
    present = [i for i, v in enumerate(column) if v is not None]
    nulls = [i for i, v in enumerate(column) if v is None]
    present.sort(key=lambda i: column[i], reverse=descending)
    return (table.select_rows(present + nulls,
                              provenance=f"{table.provenance}#sort"),)


def _validate_head(config: Mapping[str, Any]) -> None:
    n = config.get("n", 10)
    offset = config.get("offset", 0)
    if not isinstance(n, int) or n < 0:
        raise InvalidConfigError("head needs n >= 0")
    if not isinstance(offset, int) or offset < 0:
        raise InvalidConfigError("head needs offset >= 0")


def _eval_head(inputs, config, ctx):
    table: LogTable = inputs[0]
    offset = config.get("offset", 0)
    n = config.get("n", 10)
    keep = list(range(offset, min(offset + n, table.num_rows)))
    return (table.select_rows(keep, provenance=f"{table.provenance}#head"),)


# --- charts & views ------------------------------------------------------------

def _eval_table_view(inputs, config, ctx):
    return (inputs[0],)


def _validate_chart(config: Mapping[str, Any]) -> None:
    if not config.get("column"):
        raise InvalidConfigError("chart nodes need a column")
    limit = config.get("limit")
    if limit is not None and (not isinstance(limit, int) or limit < 1):
        raise InvalidConfigError("chart limit must be a positive integer")


def _value_counts(table: LogTable, column_name: str, limit: int | None):
    counts: dict[str, int] = {}
    for value in table.column(column_name):
        if value is None:
            continue
        key = canon_value(value)
        counts[key] = counts.get(key, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ordered[:limit] if limit else ordered


def _eval_bar_chart(inputs, config, ctx):
    pairs = _value_counts(inputs[0], config["column"], config.get("limit"))
    schema = Schema([Column("value", AttributeKind.CATEGORICAL),
                     Column("count", AttributeKind.ORDINAL_NUMERIC)])
    return (LogTable(schema, [[v for v, _ in pairs], [c for _, c in pairs]],
                     provenance="bar-chart"),)


def _eval_pie_chart(inputs, config, ctx):
    pairs = _value_counts(inputs[0], config["column"], config.get("limit"))
    total = sum(c for _, c in pairs) or 1
    schema = Schema([Column("value", AttributeKind.CATEGORICAL),
                     Column("count", AttributeKind.ORDINAL_NUMERIC),
                     Column("share", AttributeKind.ORDINAL_NUMERIC)])
    return (LogTable(schema, [[v for v, _ in pairs], [c for _, c in pairs],
                              [c / total for _, c in pairs]],
                     provenance="pie-chart"),)


# --- anomaly pipeline ----------------------------------------------------------

def _validate_attributes(config: Mapping[str, Any]) -> None:
    attributes = config.get("attributes")
    if attributes is not None and (
            not isinstance(attributes, (list, tuple)) or
            not all(isinstance(a, str) for a in attributes)):
        raise InvalidConfigError("attributes must be a list of column names")


def _eval_pca(inputs, config, ctx):
    matrix = encode_features(inputs[0], config.get("attributes"))
    return (pca_2d(matrix),)


def _validate_scatter_select(config: Mapping[str, Any]) -> None:
    keys = ("x0", "y0", "x1", "y1")
    given = [k for k in keys if config.get(k) is not None]
    if given and len(given) != 4:
        raise InvalidConfigError("selection needs all of x0, y0, x1, y1")
    for key in given:
        if not isinstance(config[key], (int, float)):
            raise InvalidConfigError(f"{key} must be numeric")


def _eval_scatter_select(inputs, config, ctx):
    projection = inputs[0]
    coords = projection.coords
    if config.get("x0") is None:
        return (np.zeros(coords.shape[0], dtype=bool),)
    x0, x1 = sorted((config["x0"], config["x1"]))
    y0, y1 = sorted((config["y0"], config["y1"]))
    mask = ((coords[:, 0] >= x0) & (coords[:, 0] <= x1)
            & (coords[:, 1] >= y0) & (coords[:, 1] <= y1))
    return (mask,)


def _validate_lof(config: Mapping[str, Any]) -> None:
    _validate_attributes(config)
    k = config.get("k", DEFAULT_K)
    if not isinstance(k, int) or k < 1:
        raise InvalidConfigError(f"k must be an integer >= 1, got {k!r}")


def _eval_lof(inputs, config, ctx):
    table: LogTable = inputs[0]
    matrix = encode_features(table, config.get("attributes"))
    k = clip_k(config.get("k", DEFAULT_K), matrix.n)
    return (lof_scores(matrix.points, k),)


def _resolve_flags(table: LogTable, scores, mask, threshold: float) -> np.ndarray:
    if scores is not None and mask is not None:
        raise NodeEvaluationError("connect either scores or a selection, not both")
    if scores is not None:
        if len(scores) != table.num_rows:
            raise LengthMismatchError(
                f"{len(scores)} scores for {table.num_rows} rows")
        return np.asarray(scores) > threshold
    if mask is not None:
        if len(mask) != table.num_rows:
            raise LengthMismatchError(
                f"{len(mask)} mask entries for {table.num_rows} rows")
        return np.asarray(mask, dtype=bool)
    raise NodeEvaluationError("connect a score vector or a selection mask")


def _validate_threshold(config: Mapping[str, Any]) -> None:
    threshold = config.get("threshold", DEFAULT_THRESHOLD)
    if not isinstance(threshold, (int, float)):
        raise InvalidConfigError("threshold must be numeric")


def _eval_threshold_extract(inputs, config, ctx):
    table, scores, mask = inputs
    threshold = config.get("threshold", DEFAULT_THRESHOLD)
    if scores is not None and mask is None:
        return (threshold_extract(table, scores, threshold),)
    flags = _resolve_flags(table, scores, mask, threshold)
    keep = [i for i in range(table.num_rows) if flags[i]]
    return (table.select_rows(keep, provenance=f"{table.provenance}#extract"),)


def _validate_export(config: Mapping[str, Any]) -> None:
    _validate_threshold(config)
    column = config.get("column", ANOMALY_COLUMN)
    if not isinstance(column, str) or not column:
        raise InvalidConfigError("export column name must be a non-empty string")


def _eval_anomaly_export(inputs, config, ctx):
    table, scores, mask = inputs
    threshold = config.get("threshold", DEFAULT_THRESHOLD)
    flags = _resolve_flags(table, scores, mask, threshold)
    column = config.get("column", ANOMALY_COLUMN)
    return (export_with_anomaly(table, [bool(f) for f in flags], column),)


def _validate_preview(config: Mapping[str, Any]) -> None:
    cidrs = config.get("inside_cidrs", [])
    if not isinstance(cidrs, (list, tuple)):
        raise InvalidConfigError("inside_cidrs must be a list")
    splits = config.get("splits", [])
    if not isinstance(splits, (list, tuple)):
        raise InvalidConfigError("splits must be a list of attribute names")


def _eval_preview(inputs, config, ctx):
    table: LogTable = inputs[0]
    anomaly_column = config.get("anomaly_column", ANOMALY_COLUMN)
    if anomaly_column not in table.schema:
        anomaly_column = None
    model = ClusterModel.build(table, tuple(config.get("inside_cidrs", ())),
                               anomaly_column)
    for attribute in config.get("splits", ()):
        for leaf_id in list(model.partition.keys()):
            if leaf_id in model.nodes_by_id and model.partition[leaf_id]:
                model = model.split_cluster(leaf_id, attribute)
    return (model,)


# --- registry -------------------------------------------------------------------

def _kinds() -> list[NodeKind]:
    return [
        NodeKind("csv-loader", (), (Port(PortType.TABLE, "table"),),
                 _eval_loader, _validate_loader),
        NodeKind("row-filter", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_filter, _validate_filter),
        NodeKind("column-select", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_column_select, _validate_columns_list),
        NodeKind("derive-column", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_derive, _validate_derive),
        NodeKind("aggregate", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_aggregate, _validate_aggregate),
        NodeKind("sort", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_sort, _validate_sort),
        NodeKind("head", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_head, _validate_head),
        NodeKind("table-view", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_table_view, sink=True),
        NodeKind("bar-chart-data", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_bar_chart, _validate_chart, sink=True),
        NodeKind("pie-chart-data", (_TABLE,), (Port(PortType.TABLE, "table"),),
                 _eval_pie_chart, _validate_chart, sink=True),
        NodeKind("pca-project", (_TABLE,),
                 (Port(PortType.PROJECTION_2D, "projection"),),
                 _eval_pca, _validate_attributes),
        NodeKind("scatterplot-select", (Port(PortType.PROJECTION_2D, "projection"),),
                 (Port(PortType.SELECTION_MASK, "selection"),),
                 _eval_scatter_select, _validate_scatter_select),
        NodeKind("lof-detector", (_TABLE,),
                 (Port(PortType.SCORE_VECTOR, "scores"),),
                 _eval_lof, _validate_lof),
        NodeKind("threshold-extract", (_TABLE, _SCORES_OPT, _MASK_OPT),
                 (Port(PortType.TABLE, "table"),),
                 _eval_threshold_extract, _validate_threshold),
        NodeKind("clustervis-preview", (_TABLE,),
                 (Port(PortType.CLUSTER_MODEL, "model"),),
                 _eval_preview, _validate_preview, sink=True),
        NodeKind("anomaly-export", (_TABLE, _SCORES_OPT, _MASK_OPT),
                 (Port(PortType.TABLE, "table"),),
                 _eval_anomaly_export, _validate_export, sink=True),
    ]


_default_registry: NodeRegistry | None = None


def default_registry() -> NodeRegistry:
    global _default_registry
    if _default_registry is None:
        _default_registry = NodeRegistry()
        for kind in _kinds():
            _default_registry.register(kind)
    return _default_registry


def fresh_registry() -> NodeRegistry:
    registry = NodeRegistry()
    for kind in _kinds():
        registry.register(kind)
    return registry


def register_node_kind(kind: NodeKind) -> None:
    """Register a custom kind in the shared registry."""
    default_registry().register(kind)
