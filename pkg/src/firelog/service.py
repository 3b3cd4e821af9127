"""HTTP + server-sent-events API under /api/v1.

Graph mutations auto-trigger execution; clients get {node, version, status}
events on the push channel and pull payloads afterwards. Table payloads are
paginated; concatenating all pages reproduces the table exactly.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterator

import numpy as np
from fastapi import Depends, FastAPI, Form, Request, UploadFile
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .analytics import Projection2D
from .clustervis import ClusterModel, connections_of, situation_jsonable
from .dataflow import Workflow, workflow_from_jsonable, workflow_to_jsonable
from .errors import (
    CycleError,
    DuplicateKindError,
    FirelogError,
    InvalidConfigError,
    NonLeafSplitError,
    PortOccupiedError,
    TypeMismatchError,
    UnknownAttributeError,
    UnknownClusterError,
    UnknownIpError,
    UnknownNodeError,
    WorkingSetExceededError,
)
from .ingest import ParseConfig, serialize_csv
from .store import EventLog, SessionStore, UnknownIdError
from .table import LogTable

API = "/api/v1"
DEFAULT_PAGE_SIZE = 1000

_404 = (UnknownIdError, UnknownNodeError, UnknownClusterError, UnknownIpError)
_409 = (CycleError, TypeMismatchError, PortOccupiedError, NonLeafSplitError,
        UnknownAttributeError, DuplicateKindError, WorkingSetExceededError)


def _error_response(exc: FirelogError) -> JSONResponse:
    if isinstance(exc, _404):
        return JSONResponse({"detail": str(exc)}, status_code=404)
    if isinstance(exc, _409):
        reason = getattr(exc, "reason", exc.__class__.__name__)
        if isinstance(exc, NonLeafSplitError):
            reason = "non-leaf-split"
        elif isinstance(exc, UnknownAttributeError):
            reason = "unknown-attribute"
        elif isinstance(exc, WorkingSetExceededError):
            reason = "working-set-exceeded"
        return JSONResponse({"reason": reason, "detail": str(exc)},
                            status_code=409)
    return JSONResponse({"detail": str(exc)}, status_code=400)


def schema_jsonable(table: LogTable) -> list[dict]:
    return [{"name": c.name, "kind": c.kind.value, "required": c.required,
             "role": c.role} for c in table.schema.columns]


def _table_payload(table: LogTable, page: int, page_size: int) -> dict:
    total = table.num_rows
    pages = max(1, -(-total // page_size))
    start = page * page_size
    end = min(start + page_size, total)
    rows = [list(table.row(i)) for i in range(start, end)]
    return {
        "type": "table", "schema": schema_jsonable(table),
        "rows": rows, "row_count": total,
        "page": page, "page_size": page_size, "total_pages": pages,
        "provenance": table.provenance,
    }


def _payload_jsonable(payload: Any, page: int, page_size: int) -> dict:
    if isinstance(payload, LogTable):
        return _table_payload(payload, page, page_size)
    if isinstance(payload, ClusterModel):
        return {"type": "cluster-model", "model": payload.to_jsonable()}
    if isinstance(payload, Projection2D):
        return {
            "type": "projection-2d",
            "coords": payload.coords.tolist(),
            "components": payload.components.tolist(),
            "explained_variance": list(payload.explained_variance),
        }
    if isinstance(payload, np.ndarray):
        if payload.dtype == bool:
            return {"type": "selection-mask", "mask": payload.tolist()}
        return {"type": "score-vector", "scores": payload.tolist()}
    return {"type": "value", "value": payload}


def _sse_stream(log: EventLog, since: int, max_events: int | None,
                poll: bool) -> Iterator[str]:
    sent = 0
    cursor = since
    while True:
        events = log.since(cursor) if poll else log.wait(cursor, timeout=15.0)
        for event in events:
            cursor = event["seq"] + 1
            yield (f"id: {event['seq']}\nevent: update\n"
                   f"data: {json.dumps(event, sort_keys=True)}\n\n")
            sent += 1
            if max_events is not None and sent >= max_events:
                return
        if poll:
            return
        if not events:
            yield ": keep-alive\n\n"


def create_app(data_dir: str | Path | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    data_dir = Path(data_dir or os.environ.get("FIRELOG_DATA", "firelog-data"))
    store = SessionStore(data_dir)
    app = FastAPI(title="firelog", version="1")
    app.state.store = store

    ui_dir = ui_dir or os.environ.get("FIRELOG_UI")
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.exception_handler(FirelogError)
    async def firelog_error_handler(request: Request, exc: FirelogError):
        return _error_response(exc)

    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError):
        return JSONResponse({"detail": str(exc)}, status_code=400)

    def get_store() -> SessionStore:
        return store

    # --- logs -----------------------------------------------------------------

    @app.post(API + "/logs")
    async def upload_log(file: UploadFile,
                         delimiter: str = Form(","),
                         map_timestamp: str | None = Form(None),
                         map_source: str | None = Form(None),
                         map_destination: str | None = Form(None),
                         map_action: str | None = Form(None),
                         row_limit: int | None = Form(None),
                         s: SessionStore = Depends(get_store)):
        mapping = {}
        for role, name in (("timestamp", map_timestamp),
                           ("source-ip", map_source),
                           ("destination-ip", map_destination),
                           ("action", map_action)):
            if name:
                mapping[role] = name
        config = ParseConfig(delimiter=delimiter, required_mapping=mapping,
                             row_limit=row_limit)
        record = s.add_log(await file.read(), config)
        return {
            "log_id": record.log_id,
            "row_count": record.table.num_rows,
            "schema": schema_jsonable(record.table),
            "rejections": [f"line {n}: {reason}"
                           for n, reason in record.rejections],
        }

    @app.get(API + "/logs")
    def list_logs(s: SessionStore = Depends(get_store)):
        return {"logs": [{"log_id": r.log_id, "row_count": r.table.num_rows}
                         for r in s.logs.values()]}

    # --- workflows --------------------------------------------------------------

    @app.get(API + "/workflows")
    def list_workflows(s: SessionStore = Depends(get_store)):
        return {"workflows": sorted(s.workflows)}

    @app.post(API + "/workflows")
    def create_workflow(doc: dict | None = None,
                        s: SessionStore = Depends(get_store)):
        if doc:
            workflow = workflow_from_jsonable(doc, context=s.context())
        else:
            workflow = Workflow(context=s.context())
        workflow_id = s.add_workflow(workflow)
        s.run_workflow(workflow_id)
        return {"workflow_id": workflow_id}

    @app.get(API + "/workflows/{workflow_id}")
    def get_workflow(workflow_id: str, s: SessionStore = Depends(get_store)):
        return workflow_to_jsonable(s.get_workflow(workflow_id))

    @app.put(API + "/workflows/{workflow_id}")
    def put_workflow(workflow_id: str, doc: dict,
                     s: SessionStore = Depends(get_store)):
        workflow = workflow_from_jsonable(doc, context=s.context())
        s.replace_workflow(workflow_id, workflow)
        events = s.run_workflow(workflow_id)
        return {"workflow_id": workflow_id, "events": events}

    @app.post(API + "/workflows/{workflow_id}/nodes")
    def add_node(workflow_id: str, body: dict,
                 s: SessionStore = Depends(get_store)):
        workflow = s.get_workflow(workflow_id)
        if "kind" not in body:
            raise InvalidConfigError("node body needs a kind")
        with s.lock:
            node_id = workflow.add_node(
                body["kind"], body.get("config") or {},
                position=(body.get("x", 0.0), body.get("y", 0.0)),
                node_id=body.get("id"))
        events = s.run_workflow(workflow_id)
        return {"node_id": node_id, "events": events}

    @app.post(API + "/workflows/{workflow_id}/edges")
    def add_edge(workflow_id: str, body: dict,
                 s: SessionStore = Depends(get_store)):
        workflow = s.get_workflow(workflow_id)
        with s.lock:
            workflow.connect(str(body["from"]), int(body.get("fromPort", 0)),
                             str(body["to"]), int(body.get("toPort", 0)))
        events = s.run_workflow(workflow_id)
        return {"events": events}

    @app.post(API + "/workflows/{workflow_id}/config")
    def set_config(workflow_id: str, body: dict,
                   s: SessionStore = Depends(get_store)):
        workflow = s.get_workflow(workflow_id)
        if "node" not in body:
            raise InvalidConfigError("config body needs a node id")
        with s.lock:
            if "config" in body:
                workflow.set_config(str(body["node"]), body.get("config") or {})
            if "x" in body and "y" in body:
                workflow.set_position(str(body["node"]),
                                      float(body["x"]), float(body["y"]))
        events = s.run_workflow(workflow_id)
        return {"events": events}

    @app.get(API + "/workflows/{workflow_id}/outputs/{node_id}")
    def get_output(workflow_id: str, node_id: str, page: int = 0,
                   page_size: int = DEFAULT_PAGE_SIZE,
                   s: SessionStore = Depends(get_store)):
        workflow = s.get_workflow(workflow_id)
        output = workflow.output_of(node_id)
        base = {"node": node_id, "version": output.version,
                "status": output.status}
        if output.status == "error":
            return JSONResponse({**base, "error": output.error},
                                status_code=422)
        if output.payloads is None:
            return JSONResponse({**base, "error": "not yet executed"},
                                status_code=422)
        payloads = [_payload_jsonable(p, page, max(1, page_size))
                    for p in output.payloads]
        return {**base, "payloads": payloads, "payload": payloads[0]}

    @app.get(API + "/workflows/{workflow_id}/events")
    def workflow_events(workflow_id: str, since: int = 0,
                        max_events: int | None = None, poll: bool = False,
                        s: SessionStore = Depends(get_store)):
        s.get_workflow(workflow_id)
        log = s.event_log(f"workflow:{workflow_id}")
        return StreamingResponse(_sse_stream(log, since, max_events, poll),
                                 media_type="text/event-stream")

    @app.get(API + "/node-kinds")
    def node_kinds(s: SessionStore = Depends(get_store)):
        from .dataflow import default_registry
        registry = default_registry()
        kinds = []
        for name in registry.names():
            kind = registry.get(name)
            kinds.append({
                "name": name,
                "inputs": [{"type": p.type.value, "name": p.name,
                            "required": p.required} for p in kind.inputs],
                "outputs": [{"type": p.type.value, "name": p.name}
                            for p in kind.outputs],
                "sink": kind.sink,
            })
        return {"kinds": kinds}

    # --- clustervis -------------------------------------------------------------

    @app.post(API + "/clustervis")
    def create_model(body: dict, s: SessionStore = Depends(get_store)):
        log_id = body.get("log_id")
        if not log_id:
            raise InvalidConfigError("body needs a log_id")
        table = s.get_table(log_id)
        anomaly_column = body.get("anomaly_column", "Anomaly")
        if anomaly_column not in table.schema:
            anomaly_column = None
        model = ClusterModel.build(table,
                                   tuple(body.get("inside_cidrs", ())),
                                   anomaly_column,
                                   bin_width_ms=body.get("bin_width_ms"))
        model_id = s.add_model(log_id, model)
        return {"model_id": model_id}

    @app.get(API + "/clustervis/{model_id}")
    def get_model(model_id: str, s: SessionStore = Depends(get_store)):
        return {"model_id": model_id, "model": s.get_model(model_id).to_jsonable()}

    @app.post(API + "/clustervis/{model_id}/split")
    def split(model_id: str, body: dict, s: SessionStore = Depends(get_store)):
        model = s.get_model(model_id)
        updated = model.split_cluster(str(body["cluster_id"]),
                                      str(body["attribute"]))
        event = s.update_model(model_id, updated, "split",
                               {"cluster_id": body["cluster_id"],
                                "attribute": body["attribute"]})
        return {"event": event, "partition": {
            cid: list(ips) for cid, ips in updated.partition.items()}}

    @app.post(API + "/clustervis/{model_id}/move")
    def move(model_id: str, body: dict, s: SessionStore = Depends(get_store)):
        model = s.get_model(model_id)
        updated = model.move_ip(str(body["ip"]), str(body["cluster_id"]))
        event = s.update_model(model_id, updated, "move",
                               {"ip": body["ip"]})
        return {"event": event}

    @app.post(API + "/clustervis/{model_id}/highlight")
    def highlight(model_id: str, body: dict,
                  s: SessionStore = Depends(get_store)):
        model = s.get_model(model_id)
        updated = model.set_highlight(list(body.get("ips", ())),
                                      body.get("color"))
        event = s.update_model(model_id, updated, "highlight")
        return {"event": event}

    @app.post(API + "/clustervis/{model_id}/filter")
    def time_filter(model_id: str, body: dict,
                    s: SessionStore = Depends(get_store)):
        model = s.get_model(model_id)
        if body.get("start") is None and body.get("end") is None:
            updated = model.clear_time_filter()
        else:
            updated = model.apply_time_filter(int(body["start"]),
                                              int(body["end"]))
        event = s.update_model(model_id, updated, "filter")
        return {"event": event}

    @app.post(API + "/clustervis/{model_id}/create-cluster")
    def create_cluster(model_id: str, body: dict,
                       s: SessionStore = Depends(get_store)):
        model = s.get_model(model_id)
        updated, cluster_id = model.create_cluster(str(body.get("label", "")))
        event = s.update_model(model_id, updated, "create-cluster",
                               {"cluster_id": cluster_id})
        return {"event": event, "cluster_id": cluster_id}

    @app.get(API + "/clustervis/{model_id}/situation")
    def situation(model_id: str, s: SessionStore = Depends(get_store)):
        layout = s.get_model(model_id).situation_layout()
        return {"model_id": model_id, "situation": situation_jsonable(layout)}

    @app.get(API + "/clustervis/{model_id}/connections/{ip}")
    def connections(model_id: str, ip: str,
                    s: SessionStore = Depends(get_store)):
        model = s.get_model(model_id)
        links = connections_of(model.filtered_table, ip)
        return {"ip": ip, "connections": [
            {"counterpart": cp, "direction": direction, "count": count}
            for cp, direction, count in links]}

    @app.get(API + "/clustervis/{model_id}/export")
    def export(model_id: str, s: SessionStore = Depends(get_store)):
        table = s.get_model(model_id).export_table()
        return Response(
            serialize_csv(table), media_type="text/csv",
            headers={"Content-Disposition":
                     f'attachment; filename="{model_id}-anomaly.csv"'})

    @app.get(API + "/clustervis/{model_id}/events")
    def model_events(model_id: str, since: int = 0,
                     max_events: int | None = None, poll: bool = False,
                     s: SessionStore = Depends(get_store)):
        s.get_model(model_id)
        log = s.event_log(f"model:{model_id}")
        return StreamingResponse(_sse_stream(log, since, max_events, poll),
                                 media_type="text/event-stream")

    return app
