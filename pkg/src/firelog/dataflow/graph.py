"""Typed node graph with dependency-ordered, memoizing execution.

Nodes are pure functions of (input payloads, config); edges carry whole
payloads between identically typed ports. Mutations mark the touched node
and everything downstream stale; ``execute`` then re-evaluates exactly the
nodes whose memo key (config hash + upstream versions) changed. A node whose
re-evaluation produces an identical payload keeps its version, cutting
recomputation off early for the subgraph below it. Per-node failures become
error statuses that flow downstream without touching independent branches.
"""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from ..clustervis import ClusterModel
from ..errors import (
    CycleError,
    DuplicateKindError,
    InvalidConfigError,
    PortOccupiedError,
    TypeMismatchError,
    UnknownNodeError,
    UnknownNodeKindError,
    UnknownPortError,
)
from ..table import LogTable

STATUS_CLEAN = "clean"
STATUS_STALE = "stale"
STATUS_ERROR = "error"


class PortType(str, Enum):
    TABLE = "table"
    SCORE_VECTOR = "score-vector"
    PROJECTION_2D = "projection-2d"
    SELECTION_MASK = "selection-mask"
    CLUSTER_MODEL = "cluster-model"


@dataclass(frozen=True)
class Port:
    type: PortType
    name: str = ""
    required: bool = True


@dataclass(frozen=True)
class EvalContext:
    """Ambient services for node evaluation (log lookup, file roots)."""
    resolve_log: Callable[[str], LogTable] | None = None
    default_table: LogTable | None = None
    base_dir: Path | None = None


@dataclass(frozen=True)
class NodeKind:
    """A node type: typed ports plus a pure ``evaluate``. ``evaluate`` gets
    payloads aligned with ``inputs`` (None for unconnected optional ports)
    and must return one payload per output port."""
    name: str
    inputs: tuple[Port, ...]
    outputs: tuple[Port, ...]
    evaluate: Callable[[Sequence[Any], Mapping[str, Any], EvalContext], tuple]
    validate_config: Callable[[Mapping[str, Any]], None] = lambda config: None
    sink: bool = False


class NodeRegistry:
    def __init__(self):
        self._kinds: dict[str, NodeKind] = {}

    def register(self, kind: NodeKind) -> None:
        if kind.name in self._kinds:
            raise DuplicateKindError(f"node kind {kind.name!r} already registered")
        self._kinds[kind.name] = kind

    def get(self, name: str) -> NodeKind:
        try:
            return self._kinds[name]
        except KeyError:
            raise UnknownNodeKindError(f"unknown node kind {name!r}") from None

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._kinds))

    def __contains__(self, name: str) -> bool:
        return name in self._kinds


@dataclass(frozen=True)
class Edge:
    from_node: str
    from_port: int
    to_node: str
    to_port: int


@dataclass(frozen=True)
class NodeOutput:
    payloads: tuple | None
    version: int
    status: str  # clean | stale | error
    error: str | None = None

    @property
    def payload(self) -> Any:
        return self.payloads[0] if self.payloads else None


@dataclass
class RunEvent:
    node_id: str
    version: int
    status: str
    evaluated: bool
    changed: bool


@dataclass
class _NodeState:
    kind: NodeKind
    config: dict
    x: float = 0.0
    y: float = 0.0
    stale: bool = True
    payloads: tuple | None = None
    version: int = 0
    status: str = STATUS_STALE  # intrinsic: clean/error once run
    error: str | None = None
    memo_key: tuple | None = None

    def output(self) -> NodeOutput:
        status = STATUS_STALE if self.stale else self.status
        return NodeOutput(self.payloads, self.version, status, self.error)


def config_digest(config: Mapping[str, Any]) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def payload_equal(a: Any, b: Any) -> bool:
    """Structural payload equality; versions advance exactly when this is
    False for the freshly computed payload."""
    if a is None or b is None:
        return a is b
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        return (isinstance(a, np.ndarray) and isinstance(b, np.ndarray)
                and a.shape == b.shape and a.dtype == b.dtype
                and bool(np.array_equal(a, b)))
    if isinstance(a, LogTable) and isinstance(b, LogTable):
        return a == b
    if isinstance(a, ClusterModel) or isinstance(b, ClusterModel):
        return type(a) is type(b) and a == b  # structural dataclass equality
    if isinstance(a, (tuple, list)) and isinstance(b, (tuple, list)):
        return len(a) == len(b) and all(payload_equal(x, y) for x, y in zip(a, b))
    if hasattr(a, "coords") and hasattr(b, "coords"):  # Projection2D
        return (payload_equal(a.coords, b.coords)
                and payload_equal(a.components, b.components)
                and a.explained_variance == b.explained_variance)
    try:
        return bool(a == b)
    except Exception:
        return False


class Workflow:
    """A mutable node-graph document plus its execution cache. Mutations are
    meant to be serialized per workflow; published outputs are immutable."""

    def __init__(self, registry: NodeRegistry | None = None,
                 context: EvalContext | None = None):
        from .nodes import default_registry  # cycle-free: nodes imports graph
        self.registry = registry or default_registry()
        self.context = context or EvalContext()
        self.nodes: dict[str, _NodeState] = {}
        self.edges: list[Edge] = []
        self.eval_count = 0  # total evaluate() calls, for memoization checks
        self.last_run: list[RunEvent] = []
        self._id_seq = 0

    # --- mutations ----------------------------------------------------------

    def add_node(self, kind_name: str, config: Mapping[str, Any] | None = None,
                 position: tuple[float, float] = (0.0, 0.0),
                 node_id: str | None = None) -> str:
        kind = self.registry.get(kind_name)
        config = dict(config or {})
        kind.validate_config(config)
        if node_id is None:
            self._id_seq += 1
            node_id = f"n{self._id_seq}"
            while node_id in self.nodes:
                self._id_seq += 1
                node_id = f"n{self._id_seq}"
        elif node_id in self.nodes:
            raise InvalidConfigError(f"node id {node_id!r} already in use")
        self.nodes[node_id] = _NodeState(kind=kind, config=config,
                                         x=position[0], y=position[1])
        return node_id

    def _require(self, node_id: str) -> _NodeState:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node {node_id!r}") from None

    def connect(self, from_node: str, from_port: int,
                to_node: str, to_port: int) -> None:
        src = self._require(from_node)
        dst = self._require(to_node)
        if not 0 <= from_port < len(src.kind.outputs):
            raise UnknownPortError(
                f"{from_node} has no output port {from_port}")
        if not 0 <= to_port < len(dst.kind.inputs):
            raise UnknownPortError(f"{to_node} has no input port {to_port}")
        out_type = src.kind.outputs[from_port].type
        in_type = dst.kind.inputs[to_port].type
        if out_type is not in_type:
            raise TypeMismatchError(
                f"cannot connect {out_type.value} output to "
                f"{in_type.value} input")
        if from_node == to_node or self._reaches(to_node, from_node):
            raise CycleError(
                f"edge {from_node}->{to_node} would create a cycle")
        if any(e.to_node == to_node and e.to_port == to_port for e in self.edges):
            raise PortOccupiedError(
                f"input port {to_port} of {to_node} already connected")
        self.edges.append(Edge(from_node, from_port, to_node, to_port))
        self._mark_stale(to_node)

    def set_config(self, node_id: str, config: Mapping[str, Any]) -> None:
        state = self._require(node_id)
        config = dict(config)
        state.kind.validate_config(config)
        if config == state.config:
            return  # no-op: staleness untouched
        state.config = config
        self._mark_stale(node_id)

    def set_position(self, node_id: str, x: float, y: float) -> None:
        state = self._require(node_id)
        state.x, state.y = x, y  # presentation only: no staleness

    # --- structure ----------------------------------------------------------

    def _downstream(self, node_id: str) -> set[str]:
        seen = {node_id}
        queue = deque([node_id])
        while queue:
            current = queue.popleft()
            for edge in self.edges:
                if edge.from_node == current and edge.to_node not in seen:
                    seen.add(edge.to_node)
                    queue.append(edge.to_node)
        return seen

    def _reaches(self, start: str, target: str) -> bool:
        return target in self._downstream(start)

    def _mark_stale(self, node_id: str) -> None:
        for n in self._downstream(node_id):
            self.nodes[n].stale = True

    def topological_order(self) -> list[str]:
        indegree = {n: 0 for n in self.nodes}
        for edge in self.edges:
            indegree[edge.to_node] += 1
        seq = {n: i for i, n in enumerate(self.nodes)}
        ready = sorted((n for n, deg in indegree.items() if deg == 0),
                       key=seq.__getitem__)
        order = []
        while ready:
            current = ready.pop(0)
            order.append(current)
            for edge in self.edges:
                if edge.from_node == current:
                    indegree[edge.to_node] -= 1
                    if indegree[edge.to_node] == 0:
                        ready.append(edge.to_node)
            ready.sort(key=seq.__getitem__)
        if len(order) != len(self.nodes):
            raise CycleError("graph contains a cycle")  # unreachable via API
        return order

    # --- execution ----------------------------------------------------------

    def execute(self, context: EvalContext | None = None) -> dict[str, NodeOutput]:
        ctx = context or self.context
        events: list[RunEvent] = []
        for node_id in self.topological_order():
            state = self.nodes[node_id]
            pre_version, pre_status = state.version, state.status
            in_edges = {e.to_port: e for e in self.edges if e.to_node == node_id}
            inputs: list[Any] = []
            key: list[Any] = [config_digest(state.config)]
            blocker = None
            for index, port in enumerate(state.kind.inputs):
                edge = in_edges.get(index)
                if edge is None:
                    inputs.append(None)
                    key.append(None)
                    if port.required:
                        blocker = f"missing-input: port {index} ({port.type.value})"
                    continue
                upstream = self.nodes[edge.from_node]
                key.append((edge.from_node, edge.from_port,
                            upstream.version, upstream.status))
                if upstream.status == STATUS_ERROR or upstream.payloads is None:
                    blocker = f"upstream error in {edge.from_node}"
                    inputs.append(None)
                else:
                    inputs.append(upstream.payloads[edge.from_port])
            memo_key = tuple(key)

            evaluated = False
            if blocker is not None:
                state.status = STATUS_ERROR
                state.error = blocker
                state.payloads = None
                state.memo_key = memo_key
            elif state.memo_key == memo_key:
                pass  # memoized: clean or sticky error, nothing to do
            else:
                evaluated = True
                self.eval_count += 1
                try:
                    payloads = tuple(state.kind.evaluate(inputs, state.config, ctx))
                    if len(payloads) != len(state.kind.outputs):
                        raise InvalidConfigError(
                            f"{state.kind.name} returned {len(payloads)} payloads "
                            f"for {len(state.kind.outputs)} ports")
                    if state.payloads is None or not payload_equal(
                            payloads, state.payloads):
                        state.version += 1
                        state.payloads = payloads
                    state.status = STATUS_CLEAN
                    state.error = None
                except Exception as exc:
                    state.status = STATUS_ERROR
                    state.error = str(exc) or exc.__class__.__name__
                    state.payloads = None
                state.memo_key = memo_key
            state.stale = False
            changed = state.version != pre_version or state.status != pre_status
            events.append(RunEvent(node_id, state.version, state.status,
                                   evaluated, changed))
        self.last_run = events
        return self.outputs()

    def outputs(self) -> dict[str, NodeOutput]:
        return {node_id: state.output() for node_id, state in self.nodes.items()}

    def output_of(self, node_id: str) -> NodeOutput:
        return self._require(node_id).output()
