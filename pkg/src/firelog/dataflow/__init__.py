"""Flow-based analysis engine: typed nodes, automatic downstream updates."""

from .graph import (
    Edge,
    EvalContext,
    NodeKind,
    NodeOutput,
    NodeRegistry,
    Port,
    PortType,
    RunEvent,
    Workflow,
    payload_equal,
)
from .nodes import default_registry, fresh_registry, register_node_kind
from .wire import (
    WORKFLOW_VERSION,
    dump_workflow,
    load_workflow,
    workflow_from_jsonable,
    workflow_to_jsonable,
)

__all__ = [
    "Edge",
    "EvalContext",
    "NodeKind",
    "NodeOutput",
    "NodeRegistry",
    "Port",
    "PortType",
    "RunEvent",
    "WORKFLOW_VERSION",
    "Workflow",
    "default_registry",
    "dump_workflow",
    "fresh_registry",
    "load_workflow",
    "payload_equal",
    "register_node_kind",
    "workflow_from_jsonable",
    "workflow_to_jsonable",
]
