import json

import pytest

from firelog.cli import main
from firelog.dataflow import EvalContext, Workflow, dump_workflow, load_workflow
from firelog.ingest import parse_csv
from firelog.synth import synthetic_log

CSV = (b"ts,src,dst,action,port\n"
       b"2012-04-05T17:51:26Z,10.0.0.1,203.0.113.1,accept,80\n"
       b"2012-04-05T17:52:26Z,10.0.0.2,203.0.113.1,deny,443\n")


@pytest.fixture
def log_file(tmp_path):
    path = tmp_path / "fw.csv"
    path.write_bytes(CSV)
    return path


def fig4_workflow_text() -> str:
    wf = Workflow()
    loader = wf.add_node("csv-loader", position=(0, 0))
    detector = wf.add_node("lof-detector",
                           {"k": 10, "attributes": ["action", "protocol",
                                                    "src_port", "dst_port",
                                                    "bytes"]},
                           position=(200, 0))
    extract = wf.add_node("threshold-extract", {"threshold": 1.5},
                          position=(400, 0))
    exporter = wf.add_node("anomaly-export", {"threshold": 1.5},
                           position=(400, 120))
    view = wf.add_node("table-view", position=(600, 0))
    wf.connect(loader, 0, detector, 0)
    wf.connect(loader, 0, extract, 0)
    wf.connect(detector, 0, extract, 1)
    wf.connect(loader, 0, exporter, 0)
    wf.connect(detector, 0, exporter, 1)
    wf.connect(extract, 0, view, 0)
    return dump_workflow(wf)


def test_parse_prints_schema_and_report(log_file, capsys):
    assert main(["parse", str(log_file)]) == 0
    out = capsys.readouterr().out
    assert "rows: 2" in out
    assert "src: ip-address" in out
    assert "rejected 0 lines" in out


def test_parse_unmapped_column_exits_3(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_bytes(b"ts,src,dst\n2012-04-05T17:51:26Z,1.2.3.4,5.6.7.8\n")
    assert main(["parse", str(path)]) == 3
    assert "action" in capsys.readouterr().err


def test_parse_missing_file_exits_3(tmp_path):
    assert main(["parse", str(tmp_path / "absent.csv")]) == 3


def test_lof_flags_injected_outliers(tmp_path, capsys):
    log = synthetic_log(600, seed=13, anomalies=3)
    src = tmp_path / "fw.csv"
    src.write_bytes(log.csv_bytes)
    out = tmp_path / "export.csv"
    code = main(["lof", str(src), "--attrs",
                 "action,protocol,src_port,dst_port,bytes",
                 "--k", "10", "--threshold", "1.5",
                 "--export", str(out)])
    assert code == 0
    assert "flagged: 3" in capsys.readouterr().out
    exported = parse_csv(out.read_bytes()).table
    flags = exported.column("Anomaly")
    flagged_rows = {i for i, f in enumerate(flags) if f == "true"}
    assert flagged_rows == set(log.anomaly_rows)


def test_run_writes_sink_outputs(tmp_path, capsys):
    log = synthetic_log(600, seed=14, anomalies=2)
    (tmp_path / "fw.csv").write_bytes(log.csv_bytes)
    wf_path = tmp_path / "wf.json"
    wf_path.write_text(fig4_workflow_text())
    out_dir = tmp_path / "out"
    code = main(["run", str(wf_path), "--log", str(tmp_path / "fw.csv"),
                 "--out-dir", str(out_dir)])
    assert code == 0
    exports = list(out_dir.glob("*.csv"))
    assert len(exports) == 2  # anomaly-export + table-view sink
    export_tables = {p.name: parse_csv(p.read_bytes()).table for p in exports}
    anomaly = next(t for t in export_tables.values() if "Anomaly" in t.schema)
    assert anomaly.column("Anomaly").count("true") == 2


def test_run_is_deterministic(tmp_path):
    log = synthetic_log(300, seed=15, anomalies=2)
    (tmp_path / "fw.csv").write_bytes(log.csv_bytes)
    wf_path = tmp_path / "wf.json"
    wf_path.write_text(fig4_workflow_text())
    contents = []
    for attempt in ("a", "b"):
        out_dir = tmp_path / attempt
        assert main(["run", str(wf_path), "--log", str(tmp_path / "fw.csv"),
                     "--out-dir", str(out_dir)]) == 0
        contents.append({p.name: p.read_bytes()
                         for p in sorted(out_dir.iterdir())})
    assert contents[0] == contents[1]


def test_run_reports_eval_failure(tmp_path, capsys):
    wf = Workflow()
    wf.add_node("row-filter", {"column": "action", "op": "==", "value": "x"})
    wf_path = tmp_path / "wf.json"
    wf_path.write_text(dump_workflow(wf))
    code = main(["run", str(wf_path), "--out-dir", str(tmp_path / "out")])
    assert code == 5


def test_run_bad_workflow_exits_4(tmp_path, log_file):
    wf_path = tmp_path / "wf.json"
    wf_path.write_text(json.dumps({"workflow-version": 1,
                                   "nodes": [{"id": "a", "kind": "frobnicate",
                                              "config": {}}],
                                   "edges": []}))
    assert main(["run", str(wf_path), "--log", str(log_file),
                 "--out-dir", str(tmp_path / "out")]) == 4


def test_clustervis_prints_tree_and_situation(tmp_path, capsys):
    rows = [
        "ts,src,dst,action,port,Anomaly",
        "2012-04-05T17:51:00Z,10.0.1.1,10.0.1.2,accept,80,true",
        "2012-04-05T17:52:00Z,10.0.2.1,10.0.2.2,deny,80,true",
        "2012-04-05T17:53:00Z,10.0.3.1,10.0.3.2,drop,80,true",
        "2012-04-05T17:54:00Z,10.0.0.1,203.0.113.9,accept,80,false",
    ]
    path = tmp_path / "flagged.csv"
    path.write_bytes(("\n".join(rows) + "\n").encode())
    code = main(["clustervis", str(path), "--inside-cidrs", "10.0.0.0/8",
                 "--split", "anomalous", "--split", "action", "--situation"])
    assert code == 0
    out = capsys.readouterr().out
    assert "ips: 8  anomalous: 6" in out
    assert "root/true" in out
    assert "root/true/deny" in out
    assert "situation:" in out
    assert "outside" in out


def test_cli_and_engine_payloads_match(tmp_path):
    """CLI run output equals a direct in-process execution."""
    log = synthetic_log(400, seed=16, anomalies=2)
    (tmp_path / "fw.csv").write_bytes(log.csv_bytes)
    wf_path = tmp_path / "wf.json"
    wf_path.write_text(fig4_workflow_text())
    out_dir = tmp_path / "out"
    assert main(["run", str(wf_path), "--log", str(tmp_path / "fw.csv"),
                 "--out-dir", str(out_dir)]) == 0

    table = parse_csv(log.csv_bytes).table
    wf = load_workflow(wf_path.read_text(),
                       context=EvalContext(default_table=table))
    outputs = wf.execute()
    exporter = next(n for n, s in wf.nodes.items()
                    if s.kind.name == "anomaly-export")
    from firelog.ingest import serialize_csv
    direct = serialize_csv(outputs[exporter].payload)
    assert (out_dir / f"{exporter}.csv").read_bytes() == direct
