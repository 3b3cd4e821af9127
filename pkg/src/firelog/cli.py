"""Headless command-line front end.

Subcommands: ``parse`` (schema + rejection report), ``run`` (execute a
workflow file against a log, write sink outputs), ``lof`` (one-shot
load -> score -> anomaly export pipeline), ``clustervis`` (print the
partition tree and situation scores), ``serve`` (HTTP API).

Exit codes: 2 usage, 3 parse errors, 4 graph errors, 5 evaluation errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .analytics import DEFAULT_K, DEFAULT_THRESHOLD
from .clustervis import ClusterModel, situation_jsonable
from .dataflow import EvalContext, Workflow, load_workflow
from .errors import FirelogError, GraphError, ParseError
from .ingest import ParseConfig, load_path, serialize_csv
from .service import create_app
from .store import UnknownIdError
from .table import LogTable

EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_GRAPH = 4
EXIT_EVAL = 5

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _configure_logging() -> None:
    level = os.environ.get("FIRELOG_LOG_LEVEL", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_mapping_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--delimiter", default=",")
    parser.add_argument("--map-ts", help="column holding the timestamp")
    parser.add_argument("--map-src", help="column holding the source IP")
    parser.add_argument("--map-dst", help="column holding the destination IP")
    parser.add_argument("--map-action", help="column holding the action")
    parser.add_argument("--row-limit", type=int)


def _parse_config(args) -> ParseConfig:
    mapping = {}
    for role, value in (("timestamp", args.map_ts),
                        ("source-ip", args.map_src),
                        ("destination-ip", args.map_dst),
                        ("action", args.map_action)):
        if value:
            mapping[role] = value
    return ParseConfig(delimiter=args.delimiter, required_mapping=mapping,
                       row_limit=args.row_limit)


def _load_table(path: str, config: ParseConfig):
    result = load_path(Path(path), config)
    return result


def cmd_parse(args) -> int:
    result = _load_table(args.file, _parse_config(args))
    table = result.table
    print(f"rows: {table.num_rows}")
    print("schema:")
    for column in table.schema.columns:
        role = f"  role={column.role}" if column.role else ""
        print(f"  {column.name}: {column.kind.value}{role}")
    if result.rejections:
        print(f"rejected {len(result.rejections)} lines:")
        print(result.report())
    else:
        print("rejected 0 lines")
    return 0


_CHART_KINDS = {"bar-chart-data": "bar", "pie-chart-data": "pie"}


def _write_sink(out_dir: Path, node_id: str, kind_name: str, payload) -> Path:
    if isinstance(payload, LogTable):
        path = out_dir / f"{node_id}.csv"
        path.write_bytes(serialize_csv(payload))
        return path
    if isinstance(payload, ClusterModel):
        path = out_dir / f"{node_id}.json"
        path.write_text(json.dumps(payload.to_jsonable(), indent=2,
                                   sort_keys=True))
        return path
    path = out_dir / f"{node_id}.json"
    if hasattr(payload, "coords"):
        doc = {"coords": payload.coords.tolist(),
               "components": payload.components.tolist(),
               "explained_variance": list(payload.explained_variance)}
    elif hasattr(payload, "tolist"):
        doc = {"values": payload.tolist()}
    else:
        doc = {"value": payload}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def _chart_sink(out_dir: Path, node_id: str, kind_name: str,
                table: LogTable) -> Path:
    names = table.schema.names
    values = [dict(zip(names, row)) for row in table.rows()]
    doc = {"chart": _CHART_KINDS[kind_name], "values": values}
    path = out_dir / f"{node_id}.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path


def cmd_run(args) -> int:
    text = Path(args.workflow).read_text()
    default_table = None
    if args.log:
        default_table = _load_table(args.log, _parse_config(args)).table
    context = EvalContext(default_table=default_table,
                          base_dir=Path(args.workflow).resolve().parent)
    workflow = load_workflow(text, context=context)
    outputs = workflow.execute()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = []
    for node_id, output in outputs.items():
        state = workflow.nodes[node_id]
        if output.status == "error":
            failed.append((node_id, output.error))
            print(f"{node_id} ({state.kind.name}): ERROR {output.error}")
            continue
        wrote = ""
        if state.kind.sink or args.dump_all:
            if state.kind.name in _CHART_KINDS:
                path = _chart_sink(out_dir, node_id, state.kind.name,
                                   output.payload)
            else:
                path = _write_sink(out_dir, node_id, state.kind.name,
                                   output.payload)
            wrote = f" -> {path}"
        print(f"{node_id} ({state.kind.name}): ok v{output.version}{wrote}")
    if failed:
        print(f"{len(failed)} node(s) failed", file=sys.stderr)
        return EXIT_EVAL
    return 0


def cmd_lof(args) -> int:
    table = _load_table(args.file, _parse_config(args)).table
    attributes = args.attrs.split(",") if args.attrs else None
    workflow = Workflow(context=EvalContext(default_table=table))
    loader = workflow.add_node("csv-loader")
    detector_config = {"k": args.k}
    if attributes:
        detector_config["attributes"] = attributes
    detector = workflow.add_node("lof-detector", detector_config)
    export_config = {"threshold": args.threshold}
    exporter = workflow.add_node("anomaly-export", export_config)
    workflow.connect(loader, 0, detector, 0)
    workflow.connect(loader, 0, exporter, 0)
    workflow.connect(detector, 0, exporter, 1)
    outputs = workflow.execute()
    for node_id in (loader, detector, exporter):
        output = outputs[node_id]
        if output.status == "error":
            print(f"evaluation failed at {workflow.nodes[node_id].kind.name}: "
                  f"{output.error}", file=sys.stderr)
            return EXIT_EVAL
    exported = outputs[exporter].payload
    flagged = exported.column("Anomaly").count("true")
    Path(args.export).write_bytes(serialize_csv(exported))
    print(f"rows: {table.num_rows}")
    print(f"k: {args.k}  threshold: {args.threshold:g}")
    print(f"flagged: {flagged}")
    print(f"export: {args.export}")
    return 0


def _print_tree(node: dict, partition: dict, indent: int = 0) -> None:
    members = partition.get(node["id"], [])
    label = node["label"]
    attribute = f" split-by={node['attribute']}" if node.get("attribute") else ""
    print(f"{'  ' * indent}{node['id']} \"{label}\" "
          f"[{len(members)} ips]{attribute}")
    for child in node.get("children", ()):
        _print_tree(child, partition, indent + 1)


def cmd_clustervis(args) -> int:
    table = _load_table(args.file, _parse_config(args)).table
    cidrs = []
    for chunk in args.inside_cidrs or []:
        cidrs.extend(c for c in chunk.split(",") if c)
    anomaly_column = args.anomaly_column
    if anomaly_column not in table.schema:
        anomaly_column = None
    model = ClusterModel.build(table, cidrs, anomaly_column)
    for attribute in args.split or []:
        for leaf_id in list(model.partition):
            if leaf_id in model.nodes_by_id and model.partition[leaf_id]:
                model = model.split_cluster(leaf_id, attribute)
    doc = model.to_jsonable()
    print(f"ips: {len(doc['summaries'])}  "
          f"anomalous: {sum(1 for s in doc['summaries'].values() if s['anomalous'])}")
    _print_tree(doc["tree"], doc["partition"])
    if args.situation:
        layout = situation_jsonable(model.situation_layout())
        print("situation:")
        ordered = sorted(layout.items(),
                         key=lambda kv: (kv[1]["side"], -kv[1]["affinity"], kv[0]))
        for ip, entry in ordered:
            print(f"  {entry['side']:7s} affinity={entry['affinity']:.3f}  {ip}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    ui_dir = args.ui_dir
    if ui_dir is None:
        candidate = Path("frontend/dist")
        ui_dir = candidate if candidate.is_dir() else None
    app = create_app(args.data_dir, ui_dir=ui_dir)
    if ui_dir:
        print(f"ui: http://{args.host}:{args.port}/ui/")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="firelog",
        description="Firewall-log analytics: pipelines, LOF anomaly "
                    "detection, cluster exploration")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a log and print schema + report")
    p.add_argument("file")
    _add_mapping_flags(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("run", help="execute a workflow file against a log")
    p.add_argument("workflow")
    p.add_argument("--log", help="log file used by loaders without a path")
    p.add_argument("--out-dir", default="out")
    p.add_argument("--dump-all", action="store_true",
                   help="write every node output, not just sinks")
    _add_mapping_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("lof", help="one-shot anomaly detection + export")
    p.add_argument("file")
    p.add_argument("--attrs", help="comma-separated attribute columns")
    p.add_argument("--k", type=int, default=DEFAULT_K)
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    p.add_argument("--export", required=True, help="output CSV path")
    _add_mapping_flags(p)
    p.set_defaults(func=cmd_lof)

    p = sub.add_parser("clustervis", help="print cluster partition and "
                                          "situation scores")
    p.add_argument("file")
    p.add_argument("--inside-cidrs", action="append",
                   help="comma-separated CIDRs counted as inside")
    p.add_argument("--split", action="append",
                   help="attribute to split all current clusters by "
                        "(repeatable)")
    p.add_argument("--situation", action="store_true")
    p.add_argument("--anomaly-column", default="Anomaly")
    _add_mapping_flags(p)
    p.set_defaults(func=cmd_clustervis)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", default=None)
    p.add_argument("--ui-dir", default=None,
                   help="static web client directory (default: "
                        "frontend/dist when present)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except GraphError as exc:
        print(f"graph error: {exc}", file=sys.stderr)
        return EXIT_GRAPH
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (FirelogError, UnknownIdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL


if __name__ == "__main__":
    sys.exit(main())
