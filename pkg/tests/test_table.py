import pytest

from firelog.errors import (
    MissingRequiredColumnError,
    TableInvariantError,
    UnknownColumnError,
)
from firelog.table import AttributeKind, Column, LogTable, Schema, normalize_ip

from util import BASE_SCHEMA, make_table


def test_column_returns_row_order():
    t = make_table([
        (0, "10.0.0.1", "203.0.113.1", "accept"),
        (1, "10.0.0.1", "203.0.113.2", "accept"),
        (2, "10.0.0.2", "203.0.113.1", "deny"),
    ])
    assert t.column("action") == ("accept", "accept", "deny")
    assert len(t.column("src")) == t.num_rows == 3


def test_column_empty_table():
    t = LogTable.from_rows(BASE_SCHEMA, [])
    assert t.column("action") == ()


def test_column_unknown_name():
    t = make_table([(0, "10.0.0.1", "203.0.113.1", "accept")])
    with pytest.raises(UnknownColumnError):
        t.column("nonexistent")


def test_edge_list_in_row_order():
    t = make_table([
        (0, "10.0.0.1", "203.0.113.1", "accept"),
        (1, "203.0.113.1", "10.0.0.2", "deny"),
    ])
    assert t.as_edge_list() == [
        ("10.0.0.1", "203.0.113.1", 0),
        ("203.0.113.1", "10.0.0.2", 1),
    ]


def test_edge_list_skips_null_endpoints():
    schema = Schema([
        Column("ts", AttributeKind.TIMESTAMP, required=True, role="timestamp"),
        Column("src", AttributeKind.IP_ADDRESS, role="source-ip"),
        Column("dst", AttributeKind.IP_ADDRESS, role="destination-ip"),
        Column("action", AttributeKind.CATEGORICAL, required=True, role="action"),
    ])
    t = LogTable.from_rows(schema, [
        (0, "10.0.0.1", None, "accept"),
        (1, "10.0.0.1", "10.0.0.2", "accept"),
    ])
    assert t.as_edge_list() == [("10.0.0.1", "10.0.0.2", 1)]


def test_edge_list_matches_row_scan_oracle():
    import random
    rng = random.Random(42)
    rows = []
    for i in range(1000):
        src = f"10.0.0.{rng.randrange(1, 30)}"
        dst = f"203.0.113.{rng.randrange(1, 30)}"
        rows.append((i, src, dst, "accept"))
    t = make_table(rows)
    edges = t.as_edge_list()
    expected = [(r[1], r[2], i) for i, r in enumerate(rows)]
    assert edges == expected


def test_edge_list_requires_roles():
    schema = Schema([Column("a", AttributeKind.CATEGORICAL)])
    t = LogTable.from_rows(schema, [("x",)])
    with pytest.raises(MissingRequiredColumnError):
        t.as_edge_list()


def test_duplicate_column_names_rejected():
    with pytest.raises(TableInvariantError):
        Schema([Column("a", AttributeKind.CATEGORICAL),
                Column("a", AttributeKind.CATEGORICAL)])


def test_required_null_rejected():
    with pytest.raises(TableInvariantError):
        make_table([(None, "10.0.0.1", "203.0.113.1", "accept")])


def test_kind_mismatch_rejected():
    with pytest.raises(TableInvariantError):
        make_table([(0, "10.0.0.1", "203.0.113.1", 42)])


def test_rows_have_schema_width():
    schema = Schema([Column("a", AttributeKind.CATEGORICAL),
                     Column("b", AttributeKind.CATEGORICAL)])
    with pytest.raises(TableInvariantError):
        LogTable.from_rows(schema, [("only-one",)])


def test_transforms_leave_input_unchanged():
    t = make_table([
        (0, "10.0.0.1", "203.0.113.1", "accept"),
        (1, "10.0.0.2", "203.0.113.2", "deny"),
    ])
    before = t.content_hash()
    subset = t.select_rows([1])
    assert subset.num_rows == 1
    assert subset.row(0)[3] == "deny"
    assert t.content_hash() == before


def test_normalize_ip_versions():
    assert normalize_ip("10.0.0.1") == "10.0.0.1"
    assert normalize_ip("2001:0DB8::0001") == "2001:db8::1"
    with pytest.raises(ValueError):
        normalize_ip("80")
    with pytest.raises(ValueError):
        normalize_ip("300.1.1.1")
