import json
import random

import numpy as np
import pytest

from firelog.dataflow import (
    EvalContext,
    NodeKind,
    Port,
    PortType,
    Workflow,
    dump_workflow,
    fresh_registry,
    load_workflow,
    payload_equal,
)
from firelog.errors import (
    CycleError,
    DuplicateKindError,
    InvalidConfigError,
    PortOccupiedError,
    TypeMismatchError,
    UnknownNodeKindError,
)
from firelog.synth import synthetic_log

from oracles import recompute_all
from util import assert_cycle_free, make_table, random_graph_mutation, simple_rows

CORE_KINDS = [
    "csv-loader", "row-filter", "column-select", "derive-column", "aggregate",
    "sort", "head", "table-view", "bar-chart-data", "pie-chart-data",
    "scatterplot-select", "pca-project", "lof-detector", "threshold-extract",
    "clustervis-preview", "anomaly-export",
]


@pytest.fixture
def table10():
    rows = simple_rows(10, seed=1)
    rows = [(ts, src, dst, "deny" if i < 4 else "accept", port, proto)
            for i, (ts, src, dst, _act, port, proto) in enumerate(rows)]
    return make_table(rows)


@pytest.fixture
def wf(table10):
    return Workflow(context=EvalContext(default_table=table10))


def test_core_registry_contains_catalog():
    registry = fresh_registry()
    for kind in CORE_KINDS:
        assert kind in registry, kind


def test_duplicate_kind_rejected():
    registry = fresh_registry()
    with pytest.raises(DuplicateKindError):
        registry.register(NodeKind("csv-loader", (), (), lambda i, c, x: ()))


def test_custom_kind_usable():
    registry = fresh_registry()
    registry.register(NodeKind(
        "row-count", (Port(PortType.TABLE),), (Port(PortType.SCORE_VECTOR),),
        lambda inputs, config, ctx: (np.array([float(inputs[0].num_rows)]),)))
    wf = Workflow(registry=registry,
                  context=EvalContext(default_table=make_table(simple_rows(3))))
    loader = wf.add_node("csv-loader")
    counter = wf.add_node("row-count")
    wf.connect(loader, 0, counter, 0)
    outputs = wf.execute()
    assert outputs[counter].payload[0] == 3.0


def test_add_node_examples(wf):
    loader = wf.add_node("csv-loader", {"path": "log.csv"})
    assert wf.nodes[loader].stale
    assert not wf.edges
    with pytest.raises(UnknownNodeKindError):
        wf.add_node("frobnicate")
    with pytest.raises(InvalidConfigError):
        wf.add_node("lof-detector", {"k": 0})


def test_connect_examples(wf):
    loader = wf.add_node("csv-loader")
    flt = wf.add_node("row-filter", {"column": "action", "op": "==",
                                     "value": "deny"})
    wf.execute()
    wf.connect(loader, 0, flt, 0)
    assert wf.output_of(flt).status == "stale"
    # loaders have no inputs, so the smallest loop needs two filters
    second = wf.add_node("row-filter", {"column": "action", "op": "==",
                                        "value": "deny"})
    wf.connect(flt, 0, second, 0)
    with pytest.raises(CycleError):
        wf.connect(second, 0, flt, 0)
    lof_node = wf.add_node("lof-detector", {"k": 2})
    wf.connect(loader, 0, lof_node, 0)
    view = wf.add_node("table-view")
    with pytest.raises(TypeMismatchError):
        wf.connect(lof_node, 0, view, 0)
    with pytest.raises(PortOccupiedError):
        wf.connect(loader, 0, second, 0)


def test_execute_chain_filter(wf):
    loader = wf.add_node("csv-loader")
    flt = wf.add_node("row-filter", {"column": "action", "op": "==",
                                     "value": "deny"})
    view = wf.add_node("table-view")
    wf.connect(loader, 0, flt, 0)
    wf.connect(flt, 0, view, 0)
    outputs = wf.execute()
    assert outputs[view].payload.num_rows == 4
    assert all(o.status == "clean" for o in outputs.values())


def test_memoization_zero_evals_on_noop(wf):
    loader = wf.add_node("csv-loader")
    flt = wf.add_node("row-filter", {"column": "action", "op": "==",
                                     "value": "deny"})
    wf.connect(loader, 0, flt, 0)
    wf.execute()
    before = wf.eval_count
    wf.execute()
    assert wf.eval_count == before
    assert not [e for e in wf.last_run if e.evaluated or e.changed]


def test_identical_config_reset_is_noop(wf):
    loader = wf.add_node("csv-loader")
    flt = wf.add_node("row-filter", {"column": "action", "op": "==",
                                     "value": "deny"})
    wf.connect(loader, 0, flt, 0)
    wf.execute()
    wf.set_config(flt, {"column": "action", "op": "==", "value": "deny"})
    assert wf.output_of(flt).status == "clean"  # still clean: no staleness


def test_config_change_marks_downstream_only(wf):
    loader = wf.add_node("csv-loader")
    flt = wf.add_node("row-filter", {"column": "action", "op": "==",
                                     "value": "deny"})
    view = wf.add_node("table-view")
    wf.connect(loader, 0, flt, 0)
    wf.connect(flt, 0, view, 0)
    wf.execute()
    wf.set_config(flt, {"column": "action", "op": "==", "value": "accept"})
    assert wf.output_of(loader).status == "clean"
    assert wf.output_of(flt).status == "stale"
    assert wf.output_of(view).status == "stale"
    outputs = wf.execute()
    assert outputs[view].payload.num_rows == 6


def test_version_bumps_only_on_payload_change(wf):
    loader = wf.add_node("csv-loader")
    head = wf.add_node("head", {"n": 5})
    wf.connect(loader, 0, head, 0)
    wf.execute()
    v1 = wf.output_of(head).version
    # different config, identical payload: version must not move
    wf.set_config(head, {"n": 5, "offset": 0})
    wf.execute()
    assert wf.output_of(head).version == v1
    wf.set_config(head, {"n": 3})
    wf.execute()
    assert wf.output_of(head).version == v1 + 1


def test_error_branches_are_isolated(wf):
    loader = wf.add_node("csv-loader")
    bad = wf.add_node("row-filter", {"column": "missing", "op": "==",
                                     "value": "x"})
    bad_view = wf.add_node("table-view")
    good = wf.add_node("row-filter", {"column": "action", "op": "==",
                                      "value": "deny"})
    wf.connect(loader, 0, bad, 0)
    wf.connect(bad, 0, bad_view, 0)
    wf.connect(loader, 0, good, 0)
    outputs = wf.execute()
    assert outputs[bad].status == "error"
    assert "missing" in outputs[bad].error
    assert outputs[bad_view].status == "error"
    assert "upstream" in outputs[bad_view].error
    assert outputs[good].status == "clean"
    assert outputs[good].payload.num_rows == 4
    # healing the config clears the whole chain
    wf.set_config(bad, {"column": "action", "op": "==", "value": "deny"})
    outputs = wf.execute()
    assert outputs[bad_view].status == "clean"


def test_missing_required_input_is_error(wf):
    flt = wf.add_node("row-filter", {"column": "action", "op": "==",
                                     "value": "deny"})
    outputs = wf.execute()
    assert outputs[flt].status == "error"
    assert "missing-input" in outputs[flt].error


def test_fig4_two_branch_pipeline(tmp_path):
    log = synthetic_log(400, seed=6, anomalies=4)
    path = tmp_path / "fw.csv"
    path.write_bytes(log.csv_bytes)
    wf = Workflow(context=EvalContext(base_dir=tmp_path))
    loader = wf.add_node("csv-loader", {"path": "fw.csv"})
    detector = wf.add_node("lof-detector",
                           {"k": 10, "attributes": ["action", "protocol",
                                                    "src_port", "dst_port",
                                                    "bytes"]})
    extract = wf.add_node("threshold-extract", {"threshold": 1.5})
    export = wf.add_node("anomaly-export", {"threshold": 1.5})
    projector = wf.add_node("pca-project",
                            {"attributes": ["src_port", "dst_port", "bytes"]})
    select = wf.add_node("scatterplot-select")
    preview = wf.add_node("clustervis-preview",
                          {"inside_cidrs": [log.inside_cidr]})
    wf.connect(loader, 0, detector, 0)
    wf.connect(loader, 0, extract, 0)
    wf.connect(detector, 0, extract, 1)
    wf.connect(loader, 0, export, 0)
    wf.connect(detector, 0, export, 1)
    wf.connect(loader, 0, projector, 0)
    wf.connect(projector, 0, select, 0)
    wf.connect(loader, 0, preview, 0)
    outputs = wf.execute()
    assert all(o.status == "clean" for o in outputs.values())
    assert outputs[extract].payload.num_rows == len(log.anomaly_rows)
    exported = outputs[export].payload
    assert exported.column("Anomaly").count("true") == len(log.anomaly_rows)

    # selection change re-evaluates only the selection branch
    evaluated_before = wf.eval_count
    wf.set_config(select, {"x0": -10.0, "y0": -10.0, "x1": 10.0, "y1": 10.0})
    wf.execute()
    touched = [e.node_id for e in wf.last_run if e.evaluated]
    assert touched == [select]
    assert wf.eval_count == evaluated_before + 1


def test_selection_drives_preview_chain(wf, table10):
    loader = wf.add_node("csv-loader")
    projector = wf.add_node("pca-project", {"attributes": ["port", "protocol"]})
    select = wf.add_node("scatterplot-select")
    extract = wf.add_node("threshold-extract")
    preview = wf.add_node("clustervis-preview", {"inside_cidrs": ["10.0.0.0/8"]})
    wf.connect(loader, 0, projector, 0)
    wf.connect(projector, 0, select, 0)
    wf.connect(loader, 0, extract, 0)
    wf.connect(select, 0, extract, 2)
    wf.connect(extract, 0, preview, 0)
    outputs = wf.execute()
    assert outputs[extract].payload.num_rows == 0  # empty selection
    wf.set_config(select, {"x0": -100.0, "y0": -100.0,
                           "x1": 100.0, "y1": 100.0})
    outputs = wf.execute()
    assert outputs[extract].payload.num_rows == table10.num_rows
    model = outputs[preview].payload
    assert len(model.summaries) > 0
    order = [e.node_id for e in wf.last_run if e.evaluated]
    assert order == [select, extract, preview]


def test_workflow_json_roundtrip(wf):
    loader = wf.add_node("csv-loader", {"path": "x.csv"}, position=(10, 20))
    flt = wf.add_node("row-filter", {"column": "action", "op": "==",
                                     "value": "deny"}, position=(30, 40))
    wf.connect(loader, 0, flt, 0)
    text = dump_workflow(wf)
    doc = json.loads(text)
    assert doc["workflow-version"] == 1
    assert doc["nodes"][0]["id"] == loader
    assert doc["edges"] == [{"from": loader, "fromPort": 0,
                             "to": flt, "toPort": 0}]
    again = load_workflow(text, context=wf.context)
    assert dump_workflow(again) == text


def test_workflow_json_rejects_bad_version():
    with pytest.raises(InvalidConfigError):
        load_workflow(json.dumps({"workflow-version": 99, "nodes": [],
                                  "edges": []}))


# --- randomized properties ----------------------------------------------------

def _assert_matches_oracle(wf):
    outputs = wf.outputs()
    oracle = recompute_all(wf)
    for node_id, expected in oracle.items():
        actual = outputs[node_id]
        if expected["error"] is not None:
            assert actual.status == "error", node_id
        else:
            assert actual.status == "clean", (node_id, actual.error)
            assert payload_equal(actual.payloads, expected["payloads"]), node_id


def test_random_mutation_sequences_match_recompute_oracle(table10):
    rng = random.Random(2024)
    for trial in range(60):
        wf = Workflow(context=EvalContext(default_table=table10))
        for _ in range(rng.randrange(3, 12)):
            random_graph_mutation(rng, wf)
            assert_cycle_free(wf)
        wf.execute()
        _assert_matches_oracle(wf)
        # incremental step: one more mutation, then re-execute
        random_graph_mutation(rng, wf)
        assert_cycle_free(wf)
        wf.execute()
        _assert_matches_oracle(wf)
        before = wf.eval_count
        wf.execute()
        assert wf.eval_count == before


def test_execution_reads_current_upstream_versions(wf):
    loader = wf.add_node("csv-loader")
    flt = wf.add_node("row-filter", {"column": "action", "op": "==",
                                     "value": "deny"})
    view = wf.add_node("table-view")
    wf.connect(loader, 0, flt, 0)
    wf.connect(flt, 0, view, 0)
    wf.execute()
    for edge in wf.edges:
        up = wf.nodes[edge.from_node]
        down = wf.nodes[edge.to_node]
        key_entry = down.memo_key[1 + edge.to_port]
        assert key_entry[2] == up.version
