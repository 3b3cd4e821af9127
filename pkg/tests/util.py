"""Shared builders and randomized-sequence drivers for the test suite."""

from __future__ import annotations

import random

from firelog.clustervis import ClusterModel, Role
from firelog.dataflow import Workflow
from firelog.errors import (
    CycleError,
    NonLeafSplitError,
    PortOccupiedError,
    TypeMismatchError,
    UnknownAttributeError,
)
from firelog.table import (
    AttributeKind,
    Column,
    LogTable,
    Schema,
)

BASE_SCHEMA = Schema([
    Column("ts", AttributeKind.TIMESTAMP, required=True, role="timestamp"),
    Column("src", AttributeKind.IP_ADDRESS, required=True, role="source-ip"),
    Column("dst", AttributeKind.IP_ADDRESS, required=True, role="destination-ip"),
    Column("action", AttributeKind.CATEGORICAL, required=True, role="action"),
    Column("port", AttributeKind.ORDINAL_NUMERIC),
    Column("protocol", AttributeKind.CATEGORICAL),
])


def make_table(rows, provenance="test"):
    """rows: (ts, src, dst, action, port, protocol) tuples; shorter tuples
    are padded with None."""
    padded = [tuple(r) + (None,) * (len(BASE_SCHEMA) - len(r)) for r in rows]
    return LogTable.from_rows(BASE_SCHEMA, padded, provenance=provenance)


def simple_rows(n, actions=("accept", "deny"), seed=0, start=0, step=1000):
    rng = random.Random(seed)
    rows = []
    for i in range(n):
        rows.append((
            start + i * step,
            f"10.0.0.{rng.randrange(1, 6)}",
            f"203.0.113.{rng.randrange(1, 6)}",
            actions[rng.randrange(len(actions))],
            rng.choice([80, 443, 22]),
            rng.choice(["tcp", "udp"]),
        ))
    return rows


# --- random workflow mutations --------------------------------------------------

FILTER_CONFIGS = [
    {"column": "action", "op": "==", "value": "deny"},
    {"column": "action", "op": "!=", "value": "deny"},
    {"column": "port", "op": ">", "value": 100},
    {"column": "protocol", "op": "in", "value": ["tcp"]},
]


def random_graph_mutation(rng: random.Random, wf: Workflow) -> None:
    """One add/connect/config step; invalid connects are expected rejections."""
    roll = rng.random()
    node_ids = list(wf.nodes)
    if roll < 0.35 or not node_ids:
        kind = rng.choice(["csv-loader", "row-filter", "head", "sort",
                           "table-view", "bar-chart-data", "lof-detector",
                           "aggregate"])
        config = {}
        if kind == "row-filter":
            config = rng.choice(FILTER_CONFIGS)
        elif kind == "head":
            config = {"n": rng.randrange(0, 8)}
        elif kind == "sort":
            config = {"by": rng.choice(["ts", "port", "action"]),
                      "descending": rng.random() < 0.5}
        elif kind == "bar-chart-data":
            config = {"column": rng.choice(["action", "protocol"])}
        elif kind == "lof-detector":
            config = {"k": rng.randrange(1, 5)}
        elif kind == "aggregate":
            config = {"group_by": ["action"],
                      "aggregations": [{"op": "count"}]}
        wf.add_node(kind, config)
        return
    if roll < 0.75:
        a = rng.choice(node_ids)
        b = rng.choice(node_ids)
        src_ports = len(wf.nodes[a].kind.outputs)
        dst_ports = len(wf.nodes[b].kind.inputs)
        if not src_ports or not dst_ports:
            return
        try:
            wf.connect(a, rng.randrange(src_ports), b, rng.randrange(dst_ports))
        except (CycleError, TypeMismatchError, PortOccupiedError):
            pass
        return
    node = rng.choice(node_ids)
    state = wf.nodes[node]
    if state.kind.name == "row-filter":
        wf.set_config(node, rng.choice(FILTER_CONFIGS))
    elif state.kind.name == "head":
        wf.set_config(node, {"n": rng.randrange(0, 8)})


def assert_cycle_free(wf: Workflow) -> None:
    order = wf.topological_order()
    position = {n: i for i, n in enumerate(order)}
    for e in wf.edges:
        assert position[e.from_node] < position[e.to_node]


# --- random cluster-model operations ---------------------------------------------

def random_cluster_model(rng: random.Random) -> ClusterModel:
    rows = []
    n = rng.randrange(5, 40)
    for _ in range(n):
        flagged = "true" if rng.random() < 0.3 else "false"
        rows.append((
            rng.randrange(0, 200_000),
            f"10.0.{rng.randrange(2)}.{rng.randrange(1, 12)}",
            f"203.0.113.{rng.randrange(1, 12)}",
            rng.choice(["accept", "deny", "drop"]),
            rng.choice([80, 443, None]),
            flagged,
        ))
    schema = Schema(list(BASE_SCHEMA.columns)[:5]
                    + [Column("Anomaly", AttributeKind.CATEGORICAL)])
    t = LogTable.from_rows(schema, rows)
    return ClusterModel.build(t, ["10.0.0.0/8"])


def random_cluster_op(rng: random.Random, model: ClusterModel) -> ClusterModel:
    roll = rng.random()
    leaves = list(model.partition)
    stored_leaves = [c for c in leaves if c in model.nodes_by_id]
    ips = list(model.summaries)
    if roll < 0.3 and stored_leaves:
        attr = rng.choice(["anomalous", "role", "side", "action", "port"])
        try:
            return model.split_cluster(rng.choice(stored_leaves), attr)
        except (NonLeafSplitError, UnknownAttributeError):
            return model
    if roll < 0.45:
        model, _ = model.create_cluster(f"c{rng.randrange(100)}")
        return model
    if roll < 0.65 and ips and leaves:
        return model.move_ip(rng.choice(ips), rng.choice(leaves))
    if roll < 0.8 and ips:
        chosen = rng.sample(ips, min(3, len(ips)))
        return model.set_highlight(chosen, rng.choice(["green", None]))
    start = rng.randrange(0, 150_000)
    return model.apply_time_filter(start, start + rng.randrange(1000, 150_000))


def check_partition_invariant(model: ClusterModel) -> None:
    members = [ip for ips in model.partition.values() for ip in ips]
    assert len(members) == len(set(members)), "leaves overlap"
    assert set(members) == set(model.summaries), "leaves do not cover"
    roles = [s.role for s in model.summaries.values()]
    assert (roles.count(Role.SOURCE_ONLY) + roles.count(Role.DESTINATION_ONLY)
            + roles.count(Role.BOTH)) == len(model.summaries)
