"""Disk-backed session state for the HTTP service.

Everything lives in one data directory: uploaded logs as the raw CSV plus a
parse-config sidecar, workflows as their wire-format JSON, cluster models as
a structural JSON (tree, moves, highlights, filter). In-memory state is
rebuilt from disk on start; derived data (summaries, node outputs) is
recomputed, never persisted.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

from .clustervis import ClusterModel, ClusterNode
from .dataflow import EvalContext, Workflow, load_workflow
from .dataflow.wire import dump_workflow
from .errors import FirelogError
from .ingest import ParseConfig, ParseResult, parse_csv
from .table import AttributeKind, LogTable


class UnknownIdError(FirelogError):
    pass


@dataclass
class LogRecord:
    log_id: str
    table: LogTable
    config: ParseConfig
    rejections: tuple[tuple[int, str], ...]


class EventLog:
    """Append-only per-subject event sequence with blocking reads."""

    def __init__(self):
        self._events: list[dict] = []
        self._condition = threading.Condition()

    def append(self, payload: dict) -> dict:
        with self._condition:
            event = {"seq": len(self._events), **payload}
            self._events.append(event)
            self._condition.notify_all()
            return event

    def since(self, seq: int) -> list[dict]:
        with self._condition:
            return self._events[seq:]

    def wait(self, seq: int, timeout: float) -> list[dict]:
        with self._condition:
            self._condition.wait_for(lambda: len(self._events) > seq,
                                     timeout=timeout)
            return self._events[seq:]


def _config_to_jsonable(config: ParseConfig) -> dict:
    return {
        "delimiter": config.delimiter,
        "required_mapping": dict(config.required_mapping),
        "column_kinds": {k: v.value for k, v in config.column_kinds.items()},
        "row_limit": config.row_limit,
        "time_range": list(config.time_range) if config.time_range else None,
    }


def _config_from_jsonable(doc: dict) -> ParseConfig:
    return ParseConfig(
        delimiter=doc.get("delimiter", ","),
        required_mapping=doc.get("required_mapping", {}),
        column_kinds={k: AttributeKind(v)
                      for k, v in doc.get("column_kinds", {}).items()},
        row_limit=doc.get("row_limit"),
        time_range=tuple(doc["time_range"]) if doc.get("time_range") else None,
    )


def _tree_to_jsonable(node: ClusterNode) -> dict:
    return {
        "id": node.node_id, "label": node.label, "value_key": node.value_key,
        "split_attribute": node.split_attribute,
        "user_created": node.user_created,
        "children": [_tree_to_jsonable(c) for c in node.children],
    }


def _tree_from_jsonable(doc: dict) -> ClusterNode:
    return ClusterNode(
        node_id=doc["id"], label=doc["label"], value_key=doc.get("value_key"),
        split_attribute=doc.get("split_attribute"),
        user_created=doc.get("user_created", False),
        children=tuple(_tree_from_jsonable(c) for c in doc.get("children", ())),
    )


class SessionStore:
    """Single-session state; mutations are serialized by one lock."""

    def __init__(self, data_dir: Path | str):
        self.data_dir = Path(data_dir)
        self.lock = threading.RLock()
        self.logs: dict[str, LogRecord] = {}
        self.workflows: dict[str, Workflow] = {}
        self.models: dict[str, ClusterModel] = {}
        self.model_logs: dict[str, str] = {}  # model id -> log id
        self.events: dict[str, EventLog] = {}
        for sub in ("logs", "workflows", "models"):
            (self.data_dir / sub).mkdir(parents=True, exist_ok=True)
        self._load()

    # --- shared -------------------------------------------------------------

    def context(self) -> EvalContext:
        return EvalContext(resolve_log=self.get_table, base_dir=self.data_dir)

    def event_log(self, key: str) -> EventLog:
        with self.lock:
            return self.events.setdefault(key, EventLog())

    @staticmethod
    def _new_id() -> str:
        return uuid.uuid4().hex[:12]

    def _load(self) -> None:
        for meta_path in sorted((self.data_dir / "logs").glob("*.json")):
            log_id = meta_path.stem
            csv_path = meta_path.with_suffix(".csv")
            if not csv_path.exists():
                continue
            meta = json.loads(meta_path.read_text())
            config = _config_from_jsonable(meta.get("config", {}))
            result = parse_csv(csv_path.read_bytes(), config,
                               provenance=f"log:{log_id}")
            self.logs[log_id] = LogRecord(log_id, result.table, config,
                                          result.rejections)
        for path in sorted((self.data_dir / "workflows").glob("*.json")):
            workflow = load_workflow(path.read_text(), context=self.context())
            workflow.execute()  # outputs are derived state, rebuilt on start
            self.workflows[path.stem] = workflow
        for path in sorted((self.data_dir / "models").glob("*.json")):
            doc = json.loads(path.read_text())
            log_id = doc["log_id"]
            if log_id not in self.logs:
                continue
            model = ClusterModel(
                table=self.logs[log_id].table,
                inside_cidrs=tuple(doc.get("inside_cidrs", ())),
                anomaly_column=doc.get("anomaly_column"),
                root=_tree_from_jsonable(doc["tree"]),
                manual_moves=tuple((ip, cid) for ip, cid
                                   in doc.get("manual_moves", [])),
                highlights=tuple((ip, tag) for ip, tag
                                 in doc.get("highlights", [])),
                time_filter=tuple(doc["time_filter"])
                if doc.get("time_filter") else None,
                bin_width_ms=doc.get("bin_width_ms"),
                cluster_seq=doc.get("cluster_seq", 0),
            )
            self.models[path.stem] = model
            self.model_logs[path.stem] = log_id

    # --- logs ---------------------------------------------------------------

    def add_log(self, data: bytes, config: ParseConfig) -> LogRecord:
        with self.lock:
            log_id = self._new_id()
            result: ParseResult = parse_csv(data, config,
                                            provenance=f"log:{log_id}")
            record = LogRecord(log_id, result.table, config, result.rejections)
            self.logs[log_id] = record
            (self.data_dir / "logs" / f"{log_id}.csv").write_bytes(data)
            (self.data_dir / "logs" / f"{log_id}.json").write_text(
                json.dumps({"config": _config_to_jsonable(config)}, indent=2))
            return record

    def get_log(self, log_id: str) -> LogRecord:
        try:
            return self.logs[log_id]
        except KeyError:
            raise UnknownIdError(f"unknown log {log_id!r}") from None

    def get_table(self, log_id: str) -> LogTable:
        return self.get_log(log_id).table

    # --- workflows ------------------------------------------------------------

    def add_workflow(self, workflow: Workflow | None = None) -> str:
        with self.lock:
            workflow_id = self._new_id()
            self.workflows[workflow_id] = workflow or Workflow(
                context=self.context())
            self._persist_workflow(workflow_id)
            return workflow_id

    def get_workflow(self, workflow_id: str) -> Workflow:
        try:
            return self.workflows[workflow_id]
        except KeyError:
            raise UnknownIdError(f"unknown workflow {workflow_id!r}") from None

    def replace_workflow(self, workflow_id: str, workflow: Workflow) -> None:
        with self.lock:
            self.get_workflow(workflow_id)
            self.workflows[workflow_id] = workflow
            self._persist_workflow(workflow_id)

    def _persist_workflow(self, workflow_id: str) -> None:
        path = self.data_dir / "workflows" / f"{workflow_id}.json"
        path.write_text(dump_workflow(self.workflows[workflow_id]))

    def run_workflow(self, workflow_id: str) -> list[dict]:
        """Execute after a mutation; returns the pushed events."""
        workflow = self.get_workflow(workflow_id)
        with self.lock:
            workflow.execute()
            self._persist_workflow(workflow_id)
            log = self.event_log(f"workflow:{workflow_id}")
            pushed = []
            for event in workflow.last_run:
                if event.evaluated or event.changed:
                    pushed.append(log.append({
                        "node": event.node_id,
                        "version": event.version,
                        "status": event.status,
                    }))
            return pushed

    # --- cluster models ---------------------------------------------------------

    def add_model(self, log_id: str, model: ClusterModel) -> str:
        with self.lock:
            model_id = self._new_id()
            self.get_log(log_id)
            self.models[model_id] = model
            self.model_logs[model_id] = log_id
            self._persist_model(model_id)
            return model_id

    def get_model(self, model_id: str) -> ClusterModel:
        try:
            return self.models[model_id]
        except KeyError:
            raise UnknownIdError(f"unknown model {model_id!r}") from None

    def update_model(self, model_id: str, model: ClusterModel,
                     op: str, detail: dict | None = None) -> dict:
        with self.lock:
            self.get_model(model_id)
            self.models[model_id] = model
            self._persist_model(model_id)
            log = self.event_log(f"model:{model_id}")
            payload = {"model": model_id, "op": op}
            if detail:
                payload.update(detail)
            return log.append(payload)

    def _persist_model(self, model_id: str) -> None:
        model = self.models[model_id]
        doc = {
            "log_id": self.model_logs[model_id],
            "inside_cidrs": list(model.inside_cidrs),
            "anomaly_column": model.anomaly_column,
            "tree": _tree_to_jsonable(model.root),
            "manual_moves": [list(pair) for pair in model.manual_moves],
            "highlights": [list(pair) for pair in model.highlights],
            "time_filter": list(model.time_filter) if model.time_filter else None,
            "bin_width_ms": model.bin_width_ms,
            "cluster_seq": model.cluster_seq,
        }
        path = self.data_dir / "models" / f"{model_id}.json"
        path.write_text(json.dumps(doc, indent=2))
