"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line. Tolerances are pinned here and nowhere else. Run with

    pytest tests/test_acceptance.py -v -s
"""

import json
import random
import time
from contextlib import contextmanager

import numpy as np
import pytest
from fastapi.testclient import TestClient

from firelog.analytics import encode_features, lof_scores, pca_2d
from firelog.clustervis import ClusterModel, derive_summaries, export_with_anomaly
from firelog.dataflow import EvalContext, Workflow, payload_equal
from firelog.ingest import parse_csv, roundtrip_config, serialize_csv
from firelog.service import create_app
from firelog.synth import FEATURE_ATTRIBUTES, synthetic_log

from oracles import lof_bruteforce, pca_eig_oracle, recompute_all
from util import (
    assert_cycle_free,
    check_partition_invariant,
    make_table,
    random_cluster_model,
    random_cluster_op,
    random_graph_mutation,
    simple_rows,
)

API = "/api/v1"


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"\n[ACCEPTANCE] {name}: PASS")


def test_lof_oracle_equivalence():
    with criterion("LOF oracle equivalence (100 datasets, <1e-9, <60s)"):
        rng = np.random.default_rng(2012)
        started = time.perf_counter()
        worst = 0.0
        for _ in range(100):
            n = int(rng.integers(25, 301))
            d = int(rng.integers(1, 7))
            k = int(rng.integers(2, 21))
            points = rng.normal(size=(n, d)) * float(rng.uniform(0.1, 10.0))
            engine = lof_scores(points, k)
            oracle = lof_bruteforce(points, k)
            worst = max(worst, float(np.max(np.abs(engine - oracle))))
        elapsed = time.perf_counter() - started
        assert worst < 1e-9, f"max abs diff {worst}"
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_lof_scenario_gaussian_plus_outliers():
    with criterion("LOF scenario: 5 injected outliers occupy the top-5 scores"):
        rng = np.random.default_rng(7)
        cluster = rng.normal(0.0, 1.0, size=(10, 2))
        angles = np.linspace(0.0, 2 * np.pi, 5, endpoint=False)
        outliers = 50.0 * np.column_stack([np.cos(angles), np.sin(angles)])
        points = np.vstack([cluster, outliers])
        scores = lof_scores(points, 5)
        top5 = set(np.argsort(scores)[-5:])
        assert top5 == {10, 11, 12, 13, 14}
        assert all(scores[i] > 1.5 for i in range(10, 15))
        assert all(scores[i] < 1.5 for i in range(10))


def test_lof_invariances():
    with criterion("LOF invariances: permutation + uniform scale (20 datasets, 1e-9)"):
        rng = np.random.default_rng(99)
        for _ in range(20):
            n = int(rng.integers(20, 150))
            d = int(rng.integers(1, 6))
            k = int(rng.integers(2, min(20, n - 1) + 1))
            points = rng.normal(size=(n, d))
            base = lof_scores(points, k)
            perm = rng.permutation(n)
            assert np.max(np.abs(lof_scores(points[perm], k) - base[perm])) < 1e-9
            c = float(rng.uniform(0.01, 100.0))
            assert np.max(np.abs(lof_scores(points * c, k) - base)) < 1e-9


def test_pca_oracle():
    with criterion("PCA oracle: 50 matrices match eigendecomposition (<1e-8)"):
        rng = np.random.default_rng(31)
        for _ in range(50):
            n = int(rng.integers(5, 501))
            d = int(rng.integers(2, 11))
            mixing = rng.normal(size=(d, d))
            points = rng.normal(size=(n, d)) @ mixing
            engine = pca_2d(points)
            coords, _components, eigenvalues = pca_eig_oracle(points)
            for c in range(2):
                a = engine.coords[:, c]
                b = coords[:, c]
                if np.dot(a, b) < 0:
                    b = -b
                assert np.max(np.abs(a - b)) < 1e-8
            assert np.max(np.abs(np.asarray(engine.explained_variance)
                                 - eigenvalues)) < 1e-8


def test_dataflow_soundness():
    with criterion("Dataflow: 500 mutation sequences match always-recompute "
                   "oracle; no-op re-execution evaluates nothing"):
        table = make_table(simple_rows(12, seed=8))
        rng = random.Random(777)
        for _ in range(500):
            wf = Workflow(context=EvalContext(default_table=table))
            steps = rng.randrange(2, 9)
            for _ in range(steps):
                random_graph_mutation(rng, wf)
                assert_cycle_free(wf)
                if rng.random() < 0.3:
                    wf.execute()
            wf.execute()
            assert_cycle_free(wf)
            oracle = recompute_all(wf)
            outputs = wf.outputs()
            for node_id, expected in oracle.items():
                actual = outputs[node_id]
                if expected["error"] is not None:
                    assert actual.status == "error", node_id
                else:
                    assert actual.status == "clean", (node_id, actual.error)
                    assert payload_equal(actual.payloads, expected["payloads"])
            before = wf.eval_count
            wf.execute()
            assert wf.eval_count == before


def test_fig4_pipeline_end_to_end(tmp_path):
    with criterion("Fig.-4 pipeline on 10k rows: export/import fixpoint (<10s)"):
        started = time.perf_counter()
        log = synthetic_log(10_000, seed=42, anomalies=10)
        path = tmp_path / "fw10k.csv"
        path.write_bytes(log.csv_bytes)
        wf = Workflow(context=EvalContext(base_dir=tmp_path))
        loader = wf.add_node("csv-loader", {"path": "fw10k.csv"})
        detector = wf.add_node("lof-detector",
                               {"k": 20, "attributes": list(FEATURE_ATTRIBUTES)})
        extract = wf.add_node("threshold-extract", {"threshold": 1.5})
        export = wf.add_node("anomaly-export", {"threshold": 1.5})
        wf.connect(loader, 0, detector, 0)
        wf.connect(loader, 0, extract, 0)
        wf.connect(detector, 0, extract, 1)
        wf.connect(loader, 0, export, 0)
        wf.connect(detector, 0, export, 1)
        outputs = wf.execute()
        assert all(o.status == "clean" for o in outputs.values())

        extracted = outputs[extract].payload
        assert extracted.num_rows == len(log.anomaly_rows)
        exported = outputs[export].payload
        reparsed = parse_csv(serialize_csv(exported),
                             roundtrip_config(exported)).table
        summaries = derive_summaries(reparsed, [log.inside_cidr],
                                     anomaly_column="Anomaly")
        flagged = {ip for ip, s in summaries.items() if s.anomalous}
        incident = {ip for _, src, dst, *_ in
                    ((i, extracted.row(j)[1], extracted.row(j)[2])
                     for j, i in enumerate(range(extracted.num_rows)))
                    for ip in (src, dst)}
        assert flagged == incident
        elapsed = time.perf_counter() - started
        assert elapsed < 10.0, f"took {elapsed:.1f}s"


def test_scale_bound_50k():
    with criterion("Scale: 50k rows parse -> encode -> LOF(k=20) -> export "
                   "in <60s"):
        started = time.perf_counter()
        # fewer anomalies than k: an outlier group >= k would legitimize
        # itself (its members become each other's neighborhood)
        log = synthetic_log(50_000, seed=4, anomalies=15)
        table = parse_csv(log.csv_bytes).table
        assert table.num_rows == 50_000
        matrix = encode_features(table, list(FEATURE_ATTRIBUTES))
        scores = lof_scores(matrix.points, 20)
        exported = export_with_anomaly(table, list(scores > 1.5))
        payload = serialize_csv(exported)
        elapsed = time.perf_counter() - started
        assert payload.count(b"true") == len(log.anomaly_rows)
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_clustervis_partition_property():
    with criterion("ClusterVis: 1000 op sequences keep disjoint-cover, role "
                   "partition, affinity ordering"):
        rng = random.Random(2023)
        for _ in range(1000):
            model = random_cluster_model(rng)
            for _ in range(rng.randrange(1, 6)):
                model = random_cluster_op(rng, model)
            check_partition_invariant(model)
            if model.summaries:
                layout = model.situation_layout()
                per_side = {}
                for ip, (side, affinity) in layout.entries.items():
                    cross = model.summaries[ip].cross_perimeter_count
                    per_side.setdefault(side, []).append((cross, affinity))
                for entries in per_side.values():
                    entries.sort()
                    for (c1, a1), (c2, a2) in zip(entries, entries[1:]):
                        if c1 == c2:
                            assert a1 == a2
                        else:
                            assert a1 <= a2


def test_fig5_scenario_replay():
    with criterion("Fig.-5 replay: split by anomalous then action gives "
                   "2 then 3 clusters"):
        rows = []
        flags = []
        pairs = {"accept": ("10.0.1.1", "10.0.1.2"),
                 "deny": ("10.0.2.1", "10.0.2.2"),
                 "drop": ("10.0.3.1", "10.0.3.2")}
        for action, (p, q) in pairs.items():
            rows.append((len(rows) * 1000, p, q, action, 80, "tcp"))
            flags.append(True)
        for i in range(3):
            rows.append((9000 + i * 1000, "10.0.0.1", f"203.0.113.{i + 1}",
                         "accept", 80, "tcp"))
            flags.append(False)
        flagged = export_with_anomaly(make_table(rows), flags)
        model = ClusterModel.build(flagged, ["10.0.0.0/8"])

        model = model.split_cluster("root", "anomalous")
        assert len(model.partition) == 2
        model = model.split_cluster("root/true", "action")
        revealed = [cid for cid in model.partition
                    if cid.startswith("root/true/")]
        assert len(revealed) == 3
        assert sorted(revealed) == ["root/true/accept", "root/true/deny",
                                    "root/true/drop"]


def test_api_consistency(tmp_path):
    with criterion("API: every endpoint answers, 409 on cycle, pagination "
                   "reassembles tables exactly"):
        log = synthetic_log(120, seed=3, anomalies=2)
        app = create_app(tmp_path / "data")
        with TestClient(app) as client:
            up = client.post(API + "/logs",
                             files={"file": ("fw.csv", log.csv_bytes)})
            assert up.status_code == 200
            log_id = up.json()["log_id"]
            assert client.get(API + "/logs").status_code == 200
            assert client.get(API + "/node-kinds").status_code == 200

            wf = client.post(API + "/workflows", json=None).json()["workflow_id"]
            assert wf in client.get(API + "/workflows").json()["workflows"]
            loader = client.post(
                API + f"/workflows/{wf}/nodes",
                json={"kind": "csv-loader", "config": {"log": log_id}}
            ).json()["node_id"]
            flt = client.post(
                API + f"/workflows/{wf}/nodes",
                json={"kind": "row-filter",
                      "config": {"column": "action", "op": "==",
                                 "value": "deny"}}).json()["node_id"]
            ok = client.post(API + f"/workflows/{wf}/edges",
                             json={"from": loader, "to": flt})
            assert ok.status_code == 200
            second = client.post(
                API + f"/workflows/{wf}/nodes",
                json={"kind": "row-filter",
                      "config": {"column": "action", "op": "!=",
                                 "value": "deny"}}).json()["node_id"]
            client.post(API + f"/workflows/{wf}/edges",
                        json={"from": flt, "to": second})
            conflict = client.post(API + f"/workflows/{wf}/edges",
                                   json={"from": second, "to": flt})
            assert conflict.status_code == 409
            assert conflict.json()["reason"] == "cycle-detected"

            doc = client.get(API + f"/workflows/{wf}").json()
            assert client.put(API + f"/workflows/{wf}", json=doc
                              ).status_code == 200
            assert client.post(
                API + f"/workflows/{wf}/config",
                json={"node": flt, "config": {"column": "action", "op": "==",
                                              "value": "accept"}}
            ).status_code == 200

            whole = client.get(API + f"/workflows/{wf}/outputs/{loader}",
                               params={"page_size": 100000}
                               ).json()["payload"]
            rows = []
            page = 0
            while True:
                body = client.get(API + f"/workflows/{wf}/outputs/{loader}",
                                  params={"page": page, "page_size": 7}
                                  ).json()["payload"]
                rows.extend(body["rows"])
                page += 1
                if page >= body["total_pages"]:
                    break
            assert rows == whole["rows"] and len(rows) == 120

            events = client.get(API + f"/workflows/{wf}/events",
                                params={"poll": True})
            assert events.headers["content-type"].startswith(
                "text/event-stream")
            assert events.text.count("data:") > 0

            model_id = client.post(
                API + "/clustervis",
                json={"log_id": log_id, "inside_cidrs": [log.inside_cidr]}
            ).json()["model_id"]
            assert client.get(API + f"/clustervis/{model_id}"
                              ).status_code == 200
            split = client.post(API + f"/clustervis/{model_id}/split",
                                json={"cluster_id": "root",
                                      "attribute": "anomalous"})
            assert split.status_code == 200
            partition = split.json()["partition"]
            some_leaf = sorted(partition)[0]
            some_ip = partition[some_leaf][0]
            made = client.post(API + f"/clustervis/{model_id}/create-cluster",
                               json={"label": "watch"})
            assert made.status_code == 200
            target = made.json()["cluster_id"]
            assert client.post(API + f"/clustervis/{model_id}/move",
                               json={"ip": some_ip, "cluster_id": target}
                               ).status_code == 200
            assert client.post(API + f"/clustervis/{model_id}/highlight",
                               json={"ips": [some_ip], "color": "green"}
                               ).status_code == 200
            assert client.post(API + f"/clustervis/{model_id}/filter",
                               json={"start": 0, "end": 2_000_000_000_000}
                               ).status_code == 200
            assert client.get(API + f"/clustervis/{model_id}/situation"
                              ).status_code == 200
            export = client.get(API + f"/clustervis/{model_id}/export")
            assert export.status_code == 200
            assert "Anomaly" in export.text.splitlines()[0]
            model_events = client.get(API + f"/clustervis/{model_id}/events",
                                      params={"poll": True})
            ops = [json.loads(line[6:])["op"]
                   for line in model_events.text.splitlines()
                   if line.startswith("data: ")]
            assert ops == ["split", "create-cluster", "move", "highlight",
                           "filter"]
