#!/usr/bin/env python3
"""Record real server responses for the frontend test fixtures.

Replays the scripted cluster-exploration sequence (split by anomalous, split
the anomalous cluster by action, brush the accepted pair, read the situation
layout) against the actual HTTP service and saves every model snapshot, so
the UI tests assert fidelity against genuine server output.

    python scripts/make_fixtures.py   # writes tests/fixtures/fig5.json
"""

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from firelog.service import create_app

API = "/api/v1"

FIG5_CSV = (
    b"ts,src,dst,action,port,Anomaly\n"
    b"2012-04-05T17:51:00Z,10.0.1.1,10.0.1.2,accept,80,true\n"
    b"2012-04-05T17:52:00Z,10.0.2.1,10.0.2.2,deny,80,true\n"
    b"2012-04-05T17:53:00Z,10.0.3.1,10.0.3.2,drop,80,true\n"
    b"2012-04-05T17:54:00Z,10.0.0.1,203.0.113.9,accept,80,false\n"
    b"2012-04-05T17:55:00Z,10.0.0.2,203.0.113.8,deny,80,false\n")


def main() -> int:
    out_path = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "fig5.json"
    steps = []
    with tempfile.TemporaryDirectory() as tmp:
        with TestClient(create_app(tmp)) as client:
            log_id = client.post(API + "/logs", files={
                "file": ("fig5.csv", FIG5_CSV)}).json()["log_id"]
            model_id = client.post(API + "/clustervis", json={
                "log_id": log_id,
                "inside_cidrs": ["10.0.0.0/8"]}).json()["model_id"]

            def snapshot(label):
                model = client.get(API + f"/clustervis/{model_id}").json()["model"]
                steps.append({"label": label, "model": model})

            snapshot("initial")
            assert client.post(API + f"/clustervis/{model_id}/split", json={
                "cluster_id": "root", "attribute": "anomalous"}).status_code == 200
            snapshot("split-anomalous")
            assert client.post(API + f"/clustervis/{model_id}/split", json={
                "cluster_id": "root/true", "attribute": "action"}).status_code == 200
            snapshot("split-action")
            assert client.post(API + f"/clustervis/{model_id}/highlight", json={
                "ips": ["10.0.1.1", "10.0.1.2"],
                "color": "#35d07f"}).status_code == 200
            snapshot("brush-accepted")
            situation = client.get(
                API + f"/clustervis/{model_id}/situation").json()["situation"]

    doc = {"steps": steps, "situation": situation}
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    print(f"wrote {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
