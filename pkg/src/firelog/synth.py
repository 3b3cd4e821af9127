"""Seeded synthetic firewall logs for demos, benchmarks and tests.

Shape mirrors a perimeter log: guaranteed timestamp/source/destination/action
columns plus optional port, protocol and byte-count attributes (ports are
blank on icmp rows, exercising nulls). Normal traffic cycles deterministically
through a small set of flow templates, which reproduces the heavy row
duplication of real firewall logs: encoded to features, every inlier sits in
a pile of identical points. Injected anomalies are mutually distinct
combinations of a rare port and an extreme byte count, far outside the bulk
in feature space, so density scoring separates them cleanly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timezone

# (action, protocol, src_port, dst_port, byte count); ports are None for icmp
_TEMPLATES = (
    ("accept", "tcp", 51200, 443, 900),
    ("accept", "tcp", 51201, 443, 1400),
    ("accept", "tcp", 51202, 80, 600),
    ("accept", "tcp", 51203, 80, 700),
    ("accept", "udp", 51300, 53, 180),
    ("accept", "udp", 51301, 53, 220),
    ("accept", "tcp", 51400, 22, 2600),
    ("accept", "icmp", None, None, 84),
    ("deny", "tcp", 51500, 3389, 120),
    ("deny", "tcp", 51501, 25, 130),
    ("deny", "udp", 51502, 161, 140),
    ("drop", "icmp", None, None, 96),
)

# encoded by LOF through the analytics defaults used in tests and the CLI
FEATURE_ATTRIBUTES = ("action", "protocol", "src_port", "dst_port", "bytes")


@dataclass(frozen=True)
class SyntheticLog:
    csv_bytes: bytes
    anomaly_rows: tuple[int, ...]  # 0-based data-row indices
    inside_cidr: str


def synthetic_log(rows: int, seed: int = 7, anomalies: int = 0,
                  start_ms: int = 1_333_600_000_000,
                  span_ms: int = 3_600_000,
                  inside_hosts: int = 40,
                  outside_hosts: int = 120) -> SyntheticLog:
    """CSV log with ``rows`` data lines, ``anomalies`` of them outliers at
    seeded positions. Host addresses and timing are randomized; the feature
    attributes follow the deterministic template cycle."""
    rng = random.Random(seed)
    inside = [f"10.0.{i // 250}.{i % 250 + 1}" for i in range(inside_hosts)]
    outside = [f"203.0.{i // 250}.{i % 250 + 1}" for i in range(outside_hosts)]
    anomaly_rows = sorted(rng.sample(range(rows), anomalies)) if anomalies else []
    anomaly_set = set(anomaly_rows)

    lines = ["ts,src,dst,action,protocol,src_port,dst_port,bytes"]
    template_cursor = 0
    for i in range(rows):
        t = start_ms + (span_ms * i) // max(rows, 1)
        seconds, ms = divmod(t, 1000)
        stamp = f"{_iso(seconds)}.{ms:03d}Z" if ms else f"{_iso(seconds)}Z"
        outbound = rng.random() < 0.5
        src = rng.choice(inside if outbound else outside)
        dst = rng.choice(outside if outbound else inside)
        if i in anomaly_set:
            rank = anomaly_rows.index(i)
            action, protocol = "drop", "tcp"
            src_port, dst_port = 31337, 31337 + rank
            count = 50_000_000 + rank * 1_000_000
        else:
            action, protocol, src_port, dst_port, count = (
                _TEMPLATES[template_cursor % len(_TEMPLATES)])
            template_cursor += 1
        sp = "" if src_port is None else str(src_port)
        dp = "" if dst_port is None else str(dst_port)
        lines.append(f"{stamp},{src},{dst},{action},{protocol},{sp},{dp},{count}")
    payload = ("\n".join(lines) + "\n").encode()
    return SyntheticLog(payload, tuple(anomaly_rows), "10.0.0.0/16")


def _iso(epoch_seconds: int) -> str:
    return datetime.fromtimestamp(epoch_seconds, tz=timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%S")
