"""Workflow document format (version 1).

{
  "workflow-version": 1,
  "nodes": [{"id": str, "kind": str, "config": {...}, "x": num, "y": num}],
  "edges": [{"from": str, "fromPort": int, "to": str, "toPort": int}]
}
"""

from __future__ import annotations

import json
from typing import Any, Mapping

from ..errors import InvalidConfigError
from .graph import EvalContext, NodeRegistry, Workflow

WORKFLOW_VERSION = 1


def workflow_to_jsonable(workflow: Workflow) -> dict:
    return {
        "workflow-version": WORKFLOW_VERSION,
        "nodes": [
            {"id": node_id, "kind": state.kind.name, "config": state.config,
             "x": state.x, "y": state.y}
            for node_id, state in workflow.nodes.items()
        ],
        "edges": [
            {"from": e.from_node, "fromPort": e.from_port,
             "to": e.to_node, "toPort": e.to_port}
            for e in workflow.edges
        ],
    }


def dump_workflow(workflow: Workflow) -> str:
    return json.dumps(workflow_to_jsonable(workflow), indent=2, sort_keys=False)


def workflow_from_jsonable(doc: Mapping[str, Any],
                           registry: NodeRegistry | None = None,
                           context: EvalContext | None = None) -> Workflow:
    version = doc.get("workflow-version")
    if version != WORKFLOW_VERSION:
        raise InvalidConfigError(
            f"unsupported workflow-version {version!r} (expected {WORKFLOW_VERSION})")
    workflow = Workflow(registry=registry, context=context)
    for node in doc.get("nodes", []):
        workflow.add_node(node["kind"], node.get("config") or {},
                          position=(node.get("x", 0.0), node.get("y", 0.0)),
                          node_id=str(node["id"]))
    for edge in doc.get("edges", []):
        workflow.connect(str(edge["from"]), int(edge["fromPort"]),
                         str(edge["to"]), int(edge["toPort"]))
    return workflow


def load_workflow(text: str | bytes, registry: NodeRegistry | None = None,
                  context: EvalContext | None = None) -> Workflow:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"invalid workflow JSON: {exc}") from None
    return workflow_from_jsonable(doc, registry=registry, context=context)
