"""Per-IP cluster exploration model.

One summary per unique IP (connection counts, role, modal attribute values,
anomaly flag, perimeter side), plus a recursive partition of those IPs:
clusters split by attribute values, user-created clusters, and drag-moved
members. Splits store only the chosen attribute; memberships are re-derived
from the summaries on every read, so a time filter transparently
repartitions survivors while manual moves keep pinning the IPs that remain.

Rendering (force layout, hulls, colors) lives in the web client; everything
here is pure data.
"""

from __future__ import annotations

import ipaddress
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Any, Iterable, Mapping, Sequence

from .errors import (
    ColumnCollisionError,
    EmptyModelError,
    EmptyTableError,
    InvalidCidrError,
    InvalidRangeError,
    LengthMismatchError,
    NonLeafSplitError,
    UnknownAttributeError,
    UnknownClusterError,
    UnknownIpError,
    WorkingSetExceededError,
)
from .table import (
    ROLE_DESTINATION_IP,
    ROLE_SOURCE_IP,
    ROLE_TIMESTAMP,
    AttributeKind,
    Column,
    LogTable,
    Schema,
)

WORKING_SET_LIMIT = 1_000_000
DEFAULT_BIN_TARGET = 50
DERIVED_ATTRIBUTES = ("anomalous", "role", "side")
ANOMALY_COLUMN = "Anomaly"
_TRUTHY_STRINGS = frozenset({"true", "1", "yes", "y", "t"})


class Role(str, Enum):
    SOURCE_ONLY = "source-only"
    DESTINATION_ONLY = "destination-only"
    BOTH = "both"


class Side(str, Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class IpSummary:
    ip: str
    connection_count: int
    role: Role
    most_common: Mapping[str, Any]
    anomalous: bool
    highlight: str | None
    cross_perimeter_count: int
    side: Side


@dataclass(frozen=True)
class ClusterNode:
    """Stored partition-tree node. ``value_key`` is the canonical string of
    the parent's split value this child stands for (None for root and
    user-created clusters)."""
    node_id: str
    label: str
    value_key: str | None = None
    split_attribute: str | None = None
    children: tuple["ClusterNode", ...] = ()
    user_created: bool = False

    def walk(self) -> Iterable["ClusterNode"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class SituationLayout:
    """Per IP: perimeter side and affinity in [0, 1]; within a side the
    affinity is non-decreasing in cross-perimeter connection count."""
    entries: Mapping[str, tuple[Side, float]]


def canon_value(value: Any) -> str:
    """Canonical string used for split keys, labels and tie-breaking."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def truthy_cell(value: Any) -> bool:
    if value is None:
        return False
    if isinstance(value, str):
        return value.strip().lower() in _TRUTHY_STRINGS
    return bool(value)


def _parse_cidrs(cidrs: Sequence[str]):
    networks = []
    for text in cidrs:
        try:
            networks.append(ipaddress.ip_network(text, strict=False))
        except ValueError as exc:
            raise InvalidCidrError(f"invalid CIDR {text!r}: {exc}") from None
    return networks


def _side_of(ip: str, networks) -> Side:
    addr = ipaddress.ip_address(ip)
    for net in networks:
        if addr.version == net.version and addr in net:
            return Side.INSIDE
    return Side.OUTSIDE


def derive_summaries(table: LogTable, inside_cidrs: Sequence[str],
                     anomaly_column: str | None = None) -> dict[str, IpSummary]:
    """One summary per unique IP in the source/destination columns.

    ``most_common`` holds the modal value of every non-IP column over the
    rows touching the IP (ties to the lexicographically smallest canonical
    string). ``anomalous`` is true iff any touching row has a truthy
    ``anomaly_column`` cell.
    """
    if table.num_rows > WORKING_SET_LIMIT:
        raise WorkingSetExceededError(
            f"{table.num_rows} rows exceeds the {WORKING_SET_LIMIT}-row "
            "working-set bound; narrow the time range first")
    networks = _parse_cidrs(inside_cidrs)
    src = table.role_column(ROLE_SOURCE_IP)
    dst = table.role_column(ROLE_DESTINATION_IP)
    src_idx = table.schema.role_index(ROLE_SOURCE_IP)
    dst_idx = table.schema.role_index(ROLE_DESTINATION_IP)
    attr_cols = [(c.name, table.column_at(i))
                 for i, c in enumerate(table.schema.columns)
                 if i not in (src_idx, dst_idx)]
    anomaly_cells = None
    if anomaly_column is not None and anomaly_column in table.schema:
        anomaly_cells = table.column(anomaly_column)

    counts: Counter[str] = Counter()
    as_source: set[str] = set()
    as_destination: set[str] = set()
    cross: Counter[str] = Counter()
    flagged: set[str] = set()
    value_counts: dict[str, dict[str, Counter]] = defaultdict(
        lambda: defaultdict(Counter))
    sides: dict[str, Side] = {}

    for i in range(table.num_rows):
        s, d = src[i], dst[i]
        touched = []
        if s is not None:
            as_source.add(s)
            touched.append(s)
        if d is not None:
            as_destination.add(d)
            if d != s:
                touched.append(d)
        for ip in touched:
            counts[ip] += 1
            if ip not in sides:
                sides[ip] = _side_of(ip, networks)
            if anomaly_cells is not None and truthy_cell(anomaly_cells[i]):
                flagged.add(ip)
            per_ip = value_counts[ip]
            for name, cells in attr_cols:
                value = cells[i]
                if value is not None:
                    per_ip[name][value] += 1
        if s is not None and d is not None and s != d:
            if sides[s] is not sides[d]:
                cross[s] += 1
                cross[d] += 1

    summaries = {}
    for ip in counts:
        if ip in as_source and ip in as_destination:
            role = Role.BOTH
        elif ip in as_source:
            role = Role.SOURCE_ONLY
        else:
            role = Role.DESTINATION_ONLY
        most_common = {}
        for name, counter in value_counts[ip].items():
            best = max(counter.values())
            most_common[name] = min(
                (v for v, c in counter.items() if c == best), key=canon_value)
        summaries[ip] = IpSummary(
            ip=ip, connection_count=counts[ip], role=role,
            most_common=most_common, anomalous=ip in flagged,
            highlight=None, cross_perimeter_count=cross[ip], side=sides[ip])
    return summaries


def connections_of(table: LogTable, ip: str) -> list[tuple[str, str, int]]:
    """Aggregated (counterpart, direction, count) links for one IP;
    direction is "out" when the IP is the source. Deterministic order:
    counterpart ascending, out before in."""
    src = table.role_column(ROLE_SOURCE_IP)
    dst = table.role_column(ROLE_DESTINATION_IP)
    pairs: Counter[tuple[str, str]] = Counter()
    seen = False
    for s, d in zip(src, dst):
        if s == ip and d is not None:
            pairs[(d, "out")] += 1
            seen = True
        elif d == ip and s is not None:
            pairs[(s, "in")] += 1
            seen = True
        elif s == ip or d == ip:
            seen = True
    if not seen:
        raise UnknownIpError(f"{ip} does not appear in the table")
    order = {"out": 0, "in": 1}
    return [(cp, direction, n) for (cp, direction), n in
            sorted(pairs.items(), key=lambda kv: (kv[0][0], order[kv[0][1]]))]


def default_bin_width(table: LogTable) -> int:
    """(max - min) / 50 rounded up to a whole second, at least one second."""
    stamps = [t for t in table.role_column(ROLE_TIMESTAMP) if t is not None]
    if not stamps:
        raise EmptyTableError("no timestamps to bin")
    span = max(stamps) - min(stamps)
    return max(1000, int(math.ceil(span / DEFAULT_BIN_TARGET / 1000.0)) * 1000)


def time_bins(table: LogTable, bin_width_ms: int,
              roles: Mapping[str, Role] | None = None
              ) -> list[tuple[int, dict[Role, int]]]:
    """Distinct active IPs per bin, stacked by role. Bins cover
    [min ts, max ts]; an IP active in several bins counts once per bin."""
    if bin_width_ms <= 0:
        raise InvalidRangeError(f"bin width must be positive, got {bin_width_ms}")
    if table.num_rows == 0:
        raise EmptyTableError("cannot bin an empty table")
    stamps = table.role_column(ROLE_TIMESTAMP)
    src = table.role_column(ROLE_SOURCE_IP)
    dst = table.role_column(ROLE_DESTINATION_IP)
    if roles is None:
        roles = {ip: s.role for ip, s in derive_summaries(table, ()).items()}
    start = min(stamps)
    bin_count = (max(stamps) - start) // bin_width_ms + 1
    active: list[set[str]] = [set() for _ in range(bin_count)]
    for t, s, d in zip(stamps, src, dst):
        slot = (t - start) // bin_width_ms
        if s is not None:
            active[slot].add(s)
        if d is not None:
            active[slot].add(d)
    bins = []
    for b in range(bin_count):
        per_role: dict[Role, int] = {r: 0 for r in Role}
        for ip in active[b]:
            per_role[roles[ip]] += 1
        bins.append((start + b * bin_width_ms, per_role))
    return bins


def export_with_anomaly(table: LogTable, flags: Sequence[Any],
                        column_name: str = ANOMALY_COLUMN) -> LogTable:
    """Input table plus a categorical true/false anomaly column; survives a
    CSV round trip and drives derive_summaries on re-import."""
    flags = list(flags)
    if len(flags) != table.num_rows:
        raise LengthMismatchError(
            f"{len(flags)} flags for {table.num_rows} rows")
    if column_name in table.schema:
        raise ColumnCollisionError(f"column {column_name!r} already exists")
    schema = Schema(list(table.schema.columns)
                    + [Column(column_name, AttributeKind.CATEGORICAL)])
    columns = [table.column_at(i) for i in range(len(table.schema))]
    columns.append(["true" if truthy_cell(f) else "false" for f in flags])
    return LogTable(schema, columns,
                    provenance=f"{table.provenance}#anomaly-export")


def _filter_by_time(table: LogTable, window: tuple[int, int] | None) -> LogTable:
    if window is None:
        return table
    start, end = window
    stamps = table.role_column(ROLE_TIMESTAMP)
    keep = [i for i, t in enumerate(stamps) if t is not None and start <= t < end]
    return table.select_rows(keep, provenance=f"{table.provenance}#time-filter")


def _replace_node(node: ClusterNode, node_id: str, replacement: ClusterNode) -> ClusterNode:
    if node.node_id == node_id:
        return replacement
    if not node.children:
        return node
    return replace(node, children=tuple(
        _replace_node(c, node_id, replacement) for c in node.children))


@dataclass(frozen=True)
class ClusterModel:
    """Immutable snapshot; every operation returns a new model. Derived
    state (summaries, memberships, bins) is computed lazily and cached."""

    table: LogTable
    inside_cidrs: tuple[str, ...] = ()
    anomaly_column: str | None = ANOMALY_COLUMN
    root: ClusterNode = field(default_factory=lambda: ClusterNode("root", "all"))
    manual_moves: tuple[tuple[str, str], ...] = ()
    highlights: tuple[tuple[str, str], ...] = ()
    time_filter: tuple[int, int] | None = None
    bin_width_ms: int | None = None
    cluster_seq: int = 0

    @classmethod
    def build(cls, table: LogTable, inside_cidrs: Sequence[str],
              anomaly_column: str | None = ANOMALY_COLUMN,
              bin_width_ms: int | None = None) -> "ClusterModel":
        _parse_cidrs(inside_cidrs)  # fail fast on bad CIDRs
        if table.num_rows > WORKING_SET_LIMIT:
            raise WorkingSetExceededError(
                f"{table.num_rows} rows exceeds the {WORKING_SET_LIMIT}-row "
                "working-set bound")
        return cls(table=table, inside_cidrs=tuple(inside_cidrs),
                   anomaly_column=anomaly_column, bin_width_ms=bin_width_ms)

    # --- derived state ------------------------------------------------------

    @cached_property
    def filtered_table(self) -> LogTable:
        return _filter_by_time(self.table, self.time_filter)

    @cached_property
    def summaries(self) -> dict[str, IpSummary]:
        base = derive_summaries(self.filtered_table, self.inside_cidrs,
                                self.anomaly_column)
        tags = dict(self.highlights)
        return {ip: (replace(s, highlight=tags[ip]) if ip in tags else s)
                for ip, s in base.items()}

    @cached_property
    def nodes_by_id(self) -> dict[str, ClusterNode]:
        return {node.node_id: node for node in self.root.walk()}

    def attribute_value(self, summary: IpSummary, attribute: str) -> Any:
        if attribute == "anomalous":
            return summary.anomalous
        if attribute == "role":
            return summary.role.value
        if attribute == "side":
            return summary.side.value
        return summary.most_common.get(attribute)

    @cached_property
    def partition(self) -> dict[str, tuple[str, ...]]:
        """Leaf id -> member IPs. Stored leaves always appear (possibly
        empty); value children missing from the stored tree are synthesized
        with stable ids so the leaves always cover the filtered IP set."""
        summaries = self.summaries
        nodes = self.nodes_by_id
        moves = {ip: cid for ip, cid in self.manual_moves if ip in summaries}
        membership: dict[str, list[str]] = {
            node.node_id: [] for node in nodes.values()
            if node.split_attribute is None}
        for ip in sorted(summaries):
            pinned = moves.get(ip)
            if pinned is not None and pinned not in nodes:
                membership.setdefault(pinned, []).append(ip)
                continue
            node = nodes[pinned] if pinned is not None else self.root
            while node.split_attribute is not None:
                key = canon_value(
                    self.attribute_value(summaries[ip], node.split_attribute))
                for child in node.children:
                    if child.value_key == key:
                        node = child
                        break
                else:
                    membership.setdefault(
                        f"{node.node_id}/{key}", []).append(ip)
                    node = None
                    break
            if node is not None:
                membership[node.node_id].append(ip)
        return {cid: tuple(ips) for cid, ips in membership.items()}

    def leaf_ids(self) -> tuple[str, ...]:
        return tuple(self.partition.keys())

    # --- operations ---------------------------------------------------------

    def _splittable(self, attribute: str) -> bool:
        if attribute in DERIVED_ATTRIBUTES:
            return True
        schema = self.table.schema
        if attribute not in schema:
            return False
        i = schema.index_of(attribute)
        return i not in (schema.role_index(ROLE_SOURCE_IP),
                         schema.role_index(ROLE_DESTINATION_IP))

    def split_cluster(self, cluster_id: str, attribute: str) -> "ClusterModel":
        """Replace a leaf by one child per distinct attribute value among
        its members, children in canonical value order."""
        node = self.nodes_by_id.get(cluster_id)
        if node is None:
            raise UnknownClusterError(f"unknown cluster {cluster_id!r}")
        if node.split_attribute is not None:
            raise NonLeafSplitError(f"cluster {cluster_id!r} is already split")
        if not self._splittable(attribute):
            raise UnknownAttributeError(
                f"{attribute!r} is not a splittable attribute")
        members = self.partition.get(cluster_id, ())
        keys = sorted({canon_value(
            self.attribute_value(self.summaries[ip], attribute))
            for ip in members})
        children = tuple(
            ClusterNode(node_id=f"{cluster_id}/{key}",
                        label=key if key else "(null)",
                        value_key=key)
            for key in keys)
        updated = replace(node, split_attribute=attribute, children=children)
        return replace(self, root=_replace_node(self.root, cluster_id, updated))

    def create_cluster(self, label: str) -> tuple["ClusterModel", str]:
        """New empty user cluster under the root; returns (model, id)."""
        if not label:
            raise ValueError("cluster label must be non-empty")
        seq = self.cluster_seq + 1
        cluster_id = f"u{seq}"
        child = ClusterNode(node_id=cluster_id, label=label, user_created=True)
        new_root = replace(self.root, children=self.root.children + (child,))
        return replace(self, root=new_root, cluster_seq=seq), cluster_id

    def move_ip(self, ip: str, target_cluster_id: str) -> "ClusterModel":
        """Pin an IP to a leaf; later splits of its original cluster never
        resurrect it there."""
        if ip not in self.summaries:
            raise UnknownIpError(f"unknown ip {ip!r}")
        if target_cluster_id not in self.partition:
            raise UnknownClusterError(
                f"{target_cluster_id!r} is not a current leaf cluster")
        moves = tuple((p, c) for p, c in self.manual_moves if p != ip)
        return replace(self, manual_moves=moves + ((ip, target_cluster_id),))

    def set_highlight(self, ips: Sequence[str], color_tag: str | None) -> "ClusterModel":
        """Brush a set of IPs with a color; None clears. Idempotent."""
        unknown = [ip for ip in ips if ip not in self.summaries]
        if unknown:
            raise UnknownIpError(f"unknown ips: {unknown}")
        tags = dict(self.highlights)
        for ip in ips:
            if color_tag is None:
                tags.pop(ip, None)
            else:
                tags[ip] = color_tag
        return replace(self, highlights=tuple(sorted(tags.items())))

    def apply_time_filter(self, start: int, end: int) -> "ClusterModel":
        """Restrict summaries to rows with timestamp in [start, end); manual
        moves survive only for IPs still present. Highlights are kept."""
        if start > end:
            raise InvalidRangeError(f"start {start} > end {end}")
        candidate = replace(self, time_filter=(int(start), int(end)))
        surviving = set(candidate.summaries)
        pruned = tuple((ip, cid) for ip, cid in self.manual_moves
                       if ip in surviving)
        return replace(candidate, manual_moves=pruned)

    def clear_time_filter(self) -> "ClusterModel":
        return replace(self, time_filter=None)

    def situation_layout(self) -> SituationLayout:
        """Affinity = cross-perimeter count normalized by the per-side
        maximum (0 when the side has no cross traffic)."""
        summaries = self.summaries
        if not summaries:
            raise EmptyModelError("no IPs in the current time window")
        side_max: dict[Side, int] = {Side.INSIDE: 0, Side.OUTSIDE: 0}
        for s in summaries.values():
            side_max[s.side] = max(side_max[s.side], s.cross_perimeter_count)
        entries = {}
        for ip, s in summaries.items():
            peak = side_max[s.side]
            affinity = s.cross_perimeter_count / peak if peak else 0.0
            entries[ip] = (s.side, affinity)
        return SituationLayout(entries)

    @cached_property
    def time_bin_series(self) -> list[tuple[int, dict[Role, int]]]:
        # bins always cover the full table so the bar chart can act as the
        # time filter control
        if self.table.num_rows == 0:
            return []
        width = self.bin_width_ms or default_bin_width(self.table)
        return time_bins(self.table, width)

    def export_table(self) -> LogTable:
        """Current (filtered) log plus the anomaly column: a row is flagged
        iff it touches an anomalous IP."""
        table = self.filtered_table
        summaries = self.summaries
        src = table.role_column(ROLE_SOURCE_IP)
        dst = table.role_column(ROLE_DESTINATION_IP)
        flags = []
        for s, d in zip(src, dst):
            flags.append(
                (s is not None and summaries[s].anomalous)
                or (d is not None and summaries[d].anomalous))
        name = ANOMALY_COLUMN
        if name in table.schema:
            base = name
            n = 2
            while name in table.schema:
                name = f"{base}{n}"
                n += 1
        return export_with_anomaly(table, flags, name)

    # --- wire form ----------------------------------------------------------

    def _tree_jsonable(self, node: ClusterNode,
                       synthesized: Mapping[str, list[str]]) -> dict:
        children = [self._tree_jsonable(c, synthesized) for c in node.children]
        for key in sorted(synthesized.get(node.node_id, [])):
            children.append({
                "id": f"{node.node_id}/{key}", "label": key if key else "(null)",
                "value": key, "attribute": None, "user_created": False,
                "synthesized": True, "children": [],
            })
        return {
            "id": node.node_id, "label": node.label, "value": node.value_key,
            "attribute": node.split_attribute, "user_created": node.user_created,
            "synthesized": False, "children": children,
        }

    def to_jsonable(self) -> dict:
        partition = self.partition
        stored = set(self.nodes_by_id)
        synthesized: dict[str, list[str]] = defaultdict(list)
        orphans = []
        for leaf in partition:
            if leaf in stored:
                continue
            parent, _, key = leaf.rpartition("/")
            if parent in stored:
                synthesized[parent].append(key)
            else:
                orphans.append(leaf)
        tree = self._tree_jsonable(self.root, synthesized)
        for leaf in sorted(orphans):
            tree["children"].append({
                "id": leaf, "label": leaf, "value": None, "attribute": None,
                "user_created": False, "synthesized": True, "children": [],
            })
        return {
            "summaries": {
                ip: {
                    "ip": s.ip,
                    "connection_count": s.connection_count,
                    "role": s.role.value,
                    "most_common": {k: _json_value(v)
                                    for k, v in sorted(s.most_common.items())},
                    "anomalous": s.anomalous,
                    "highlight": s.highlight,
                    "cross_perimeter_count": s.cross_perimeter_count,
                    "side": s.side.value,
                } for ip, s in sorted(self.summaries.items())
            },
            "tree": tree,
            "partition": {cid: list(ips) for cid, ips in partition.items()},
            "manual_moves": {ip: cid for ip, cid in self.manual_moves},
            "highlights": {ip: tag for ip, tag in self.highlights},
            "time_filter": list(self.time_filter) if self.time_filter else None,
            "time_bins": [
                {"start": start,
                 "counts": {role.value: n for role, n in per_role.items()}}
                for start, per_role in self.time_bin_series
            ],
        }


def _json_value(value: Any) -> Any:
    if isinstance(value, (int, float, str)) or value is None:
        return value
    return canon_value(value)


def situation_jsonable(layout: SituationLayout) -> dict:
    return {ip: {"side": side.value, "affinity": affinity}
            for ip, (side, affinity) in sorted(layout.entries.items())}
