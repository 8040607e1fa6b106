"""Static holarchy structure: holon records, membership, and the per-super-holon
communication graphs, plus the structural queries the runtime needs.

A holarchy is a tree of holons. Levels are numbered from the root (level 0)
downward. Leaves ("terminal" holons) own private datasets; inner nodes
("non-terminal" holons, the heads of their super-holons) only aggregate and
relay. Each non-terminal additionally owns a communication graph whose edges
connect its children into a peer ("neighbor") network.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence


class ConfigError(ValueError):
    """Config text that cannot be turned into a valid holarchy."""


@dataclass(frozen=True, order=True)
class HolonId:
    """(level, index) address. Level 0 is the root; indices start at 1."""

    level: int
    index: int

    def __post_init__(self) -> None:
        if self.level < 0:
            raise ValueError(f"holon level must be >= 0, got {self.level}")
        if self.index < 1:
            raise ValueError(f"holon index must be >= 1, got {self.index}")

    def __repr__(self) -> str:
        return f"h({self.level},{self.index})"


class HolonKind(str, Enum):
    TERMINAL = "terminal"
    NON_TERMINAL = "nonterminal"


@dataclass(frozen=True)
class HolonRecord:
    id: HolonId
    kind: HolonKind
    parent: Optional[HolonId]
    children: tuple[HolonId, ...] = ()
    dataset_ref: Optional[str] = None


def _sorted_pair(a: HolonId, b: HolonId) -> tuple[HolonId, HolonId]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class CommunicationGraph:
    """Undirected peer edges among the children of `owner`.

    Edges are stored as sorted pairs so equality, hashing, and iteration are
    canonical regardless of how the graph was declared.
    """

    owner: HolonId
    edges: frozenset[tuple[HolonId, HolonId]] = frozenset()

    @staticmethod
    def from_pairs(owner: HolonId, pairs: Iterable[tuple[HolonId, HolonId]]) -> "CommunicationGraph":
        return CommunicationGraph(owner, frozenset(_sorted_pair(a, b) for a, b in pairs))

    def adjacent(self, node: HolonId) -> set[HolonId]:
        out: set[HolonId] = set()
        for a, b in self.edges:
            if a == node:
                out.add(b)
            elif b == node:
                out.add(a)
        return out

    def sorted_edges(self) -> list[tuple[HolonId, HolonId]]:
        return sorted(self.edges)


@dataclass(frozen=True)
class HolarchySpec:
    """The whole static structure. `records` preserves declaration order,
    which fixes the canonical sender order used everywhere downstream."""

    records: Mapping[HolonId, HolonRecord]
    graphs: Mapping[HolonId, CommunicationGraph]
    root: HolonId

    def record(self, hid: HolonId) -> HolonRecord:
        try:
            return self.records[hid]
        except KeyError:
            raise KeyError(f"unknown holon {hid}") from None

    def order_index(self) -> dict[HolonId, int]:
        """Declaration-order rank of every holon."""
        return {hid: i for i, hid in enumerate(self.records)}

    def terminals(self) -> list[HolonId]:
        return [h for h, r in self.records.items() if r.kind is HolonKind.TERMINAL]

    def non_terminals(self) -> list[HolonId]:
        return [h for h, r in self.records.items() if r.kind is HolonKind.NON_TERMINAL]

    def depth(self) -> int:
        """Number of non-root levels."""
        return max(h.level for h in self.records)


def is_terminal(spec: HolarchySpec, hid: HolonId) -> bool:
    return spec.record(hid).kind is HolonKind.TERMINAL


def superiors(spec: HolarchySpec, hid: HolonId) -> set[HolonId]:
    """The parent as a set; empty for the root."""
    rec = spec.record(hid)
    return set() if rec.parent is None else {rec.parent}


def subordinates(spec: HolarchySpec, hid: HolonId) -> tuple[HolonId, ...]:
    """Children in declaration order; empty for terminals."""
    return spec.record(hid).children


def neighbors(spec: HolarchySpec, hid: HolonId) -> set[HolonId]:
    """Siblings adjacent to `hid` in the parent's communication graph."""
    rec = spec.record(hid)
    if rec.parent is None:
        raise ValueError(f"{hid} is the root and has no enclosing communication graph")
    graph = spec.graphs.get(rec.parent)
    return graph.adjacent(hid) if graph is not None else set()


def aggregate_data_size(
    spec: HolarchySpec, hid: HolonId, terminal_sizes: Mapping[HolonId, int]
) -> int:
    """Recursive training-data size: a terminal's own sample count, or the sum
    over subordinates for a non-terminal."""
    rec = spec.record(hid)
    if rec.kind is HolonKind.TERMINAL:
        try:
            return int(terminal_sizes[hid])
        except KeyError:
            raise ValueError(f"missing terminal data size for {hid}") from None
    return sum(aggregate_data_size(spec, c, terminal_sizes) for c in rec.children)


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    detail: str


def validate(spec: HolarchySpec) -> list[Violation]:
    """Structural check. Returns an empty list iff every invariant holds.
    Violations are data, not exceptions; the check never mutates the spec."""
    out: list[Violation] = []
    records = spec.records

    roots = [h for h, r in records.items() if r.parent is None]
    if len(roots) != 1:
        out.append(Violation("root-count", str(roots), f"expected exactly one root, found {len(roots)}"))
    for r in roots:
        if r.level != 0:
            out.append(Violation("root-level", str(r), "root must be at level 0"))
    if spec.root not in records or records[spec.root].parent is not None:
        out.append(Violation("root-field", str(spec.root), "spec.root does not name a parentless record"))

    # Membership: count how many children lists mention each holon.
    memberships: dict[HolonId, list[HolonId]] = {}
    for h, rec in records.items():
        seen: set[HolonId] = set()
        for c in rec.children:
            if c not in records:
                out.append(Violation("dangling-child", str(h), f"children list names unknown holon {c}"))
                continue
            if c in seen:
                out.append(Violation("duplicate-child", str(h), f"{c} listed twice"))
            seen.add(c)
            memberships.setdefault(c, []).append(h)

    for h, rec in records.items():
        if rec.parent is not None and rec.parent not in records:
            out.append(Violation("dangling-parent", str(h), f"parent {rec.parent} does not exist"))
            continue
        owners = memberships.get(h, [])
        if rec.parent is None:
            if owners:
                out.append(Violation("root-membership", str(h), f"root listed as child of {owners}"))
        elif len(owners) != 1:
            out.append(Violation("membership-uniqueness", str(h), f"listed as child of {len(owners)} holons: {owners}"))
        elif owners[0] != rec.parent:
            out.append(Violation("membership-mismatch", str(h), f"parent field says {rec.parent}, listed under {owners[0]}"))
        if rec.parent is not None and rec.parent in records:
            if rec.id.level != rec.parent.level + 1:
                out.append(Violation("level-mismatch", str(h), f"level {rec.id.level} under parent at level {rec.parent.level}"))

    for h, rec in records.items():
        if rec.kind is HolonKind.TERMINAL:
            if rec.children:
                out.append(Violation("terminal-children", str(h), "terminal holon has children"))
            if rec.dataset_ref is None:
                out.append(Violation("dataset-ref", str(h), "terminal holon lacks a dataset_ref"))
        else:
            if not rec.children:
                out.append(Violation("childless-head", str(h), "non-terminal holon has no children"))
            if rec.dataset_ref is not None:
                out.append(Violation("dataset-ref", str(h), "non-terminal holon carries a dataset_ref"))
            if h not in spec.graphs:
                out.append(Violation("graph-missing", str(h), "non-terminal holon has no communication graph"))

    for owner, graph in spec.graphs.items():
        if owner not in records:
            out.append(Violation("graph-owner", str(owner), "graph owned by unknown holon"))
            continue
        if records[owner].kind is HolonKind.TERMINAL:
            out.append(Violation("graph-owner", str(owner), "graph owned by a terminal holon"))
            continue
        if graph.owner != owner:
            out.append(Violation("graph-owner", str(owner), f"graph record names owner {graph.owner}"))
        children = set(records[owner].children)
        for a, b in graph.sorted_edges():
            if a == b:
                out.append(Violation("graph-self-loop", str(owner), f"self-loop at {a}"))
                continue
            if a not in children or b not in children:
                out.append(Violation("cross-holon-edge", str(owner), f"edge ({a},{b}) joins non-children of {owner}"))
    return out


# ---------------------------------------------------------------------------
# Config parsing and emission

_CONFIG_SCHEMA = """\
The config is a JSON object:
  {"holons": [{"level": int, "index": int, "kind": "terminal"|"nonterminal",
               "parent": [level, index] | null, "dataset_ref": str (terminals)}, ...],
   "graphs": [{"owner": [level, index],
               "edges": [[[l, i], [l, i]], ...]}, ...]}
Children are derived from the parent fields, in declaration order. Non-terminals
without a declared graph get an empty one.
"""


def _parse_id(raw: object, where: str) -> HolonId:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 2
        or not all(isinstance(x, int) and not isinstance(x, bool) for x in raw)
    ):
        raise ConfigError(f"{where}: holon id must be a [level, index] pair of integers, got {raw!r}")
    try:
        return HolonId(raw[0], raw[1])
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from None


def parse_holarchy(config_text: str) -> HolarchySpec:
    """Parse config text into a validated HolarchySpec.

    Raises ConfigError on syntax errors (with position), duplicate ids,
    dangling parent/child/graph references, or any structural violation.
    """
    try:
        doc = json.loads(config_text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"syntax error at line {e.lineno} column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict) or "holons" not in doc:
        raise ConfigError("config must be a JSON object with a 'holons' list")
    raw_holons = doc["holons"]
    if not isinstance(raw_holons, list) or not raw_holons:
        raise ConfigError("'holons' must be a non-empty list")

    entries: dict[HolonId, dict] = {}
    for pos, item in enumerate(raw_holons):
        where = f"holons[{pos}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{where}: expected an object")
        for key in ("level", "index", "kind"):
            if key not in item:
                raise ConfigError(f"{where}: missing required field '{key}'")
        hid = _parse_id([item["level"], item["index"]], where)
        if hid in entries:
            raise ConfigError(f"{where}: duplicate holon id {hid}")
        try:
            kind = HolonKind(item["kind"])
        except ValueError:
            raise ConfigError(f"{where}: unknown kind {item['kind']!r}") from None
        parent = None if item.get("parent") is None else _parse_id(item["parent"], where)
        entries[hid] = {
            "kind": kind,
            "parent": parent,
            "dataset_ref": item.get("dataset_ref"),
        }

    children: dict[HolonId, list[HolonId]] = {hid: [] for hid in entries}
    for hid, entry in entries.items():
        parent = entry["parent"]
        if parent is None:
            continue
        if parent not in entries:
            raise ConfigError(f"dangling reference: {hid} names nonexistent parent {parent}")
        children[parent].append(hid)

    records = {
        hid: HolonRecord(
            id=hid,
            kind=entry["kind"],
            parent=entry["parent"],
            children=tuple(children[hid]),
            dataset_ref=entry["dataset_ref"],
        )
        for hid, entry in entries.items()
    }

    graphs: dict[HolonId, CommunicationGraph] = {}
    for pos, item in enumerate(doc.get("graphs", [])):
        where = f"graphs[{pos}]"
        if not isinstance(item, dict) or "owner" not in item:
            raise ConfigError(f"{where}: expected an object with an 'owner' field")
        owner = _parse_id(item["owner"], where)
        if owner not in records:
            raise ConfigError(f"{where}: dangling reference: graph owner {owner} does not exist")
        if owner in graphs:
            raise ConfigError(f"{where}: duplicate graph for owner {owner}")
        pairs = []
        for edge in item.get("edges", []):
            if not isinstance(edge, (list, tuple)) or len(edge) != 2:
                raise ConfigError(f"{where}: each edge must be a pair of holon ids")
            a = _parse_id(edge[0], where)
            b = _parse_id(edge[1], where)
            for endpoint in (a, b):
                if endpoint not in records:
                    raise ConfigError(f"{where}: dangling reference: edge endpoint {endpoint} does not exist")
            pairs.append((a, b))
        graphs[owner] = CommunicationGraph.from_pairs(owner, pairs)

    for hid, rec in records.items():
        if rec.kind is HolonKind.NON_TERMINAL and hid not in graphs:
            graphs[hid] = CommunicationGraph(hid)

    roots = [hid for hid, rec in records.items() if rec.parent is None]
    if len(roots) != 1:
        raise ConfigError(f"expected exactly one parentless root holon, found {len(roots)}")

    spec = HolarchySpec(records=records, graphs=graphs, root=roots[0])
    report = validate(spec)
    if report:
        lines = "; ".join(f"[{v.code}] {v.subject}: {v.detail}" for v in report)
        raise ConfigError(f"invalid holarchy: {lines}")
    return spec


def format_holarchy(spec: HolarchySpec) -> str:
    """Emit the canonical config text for a spec (declaration order preserved).
    parse_holarchy(format_holarchy(spec)) == spec."""
    holons = []
    for hid, rec in spec.records.items():
        item: dict = {
            "level": hid.level,
            "index": hid.index,
            "kind": rec.kind.value,
            "parent": None if rec.parent is None else [rec.parent.level, rec.parent.index],
        }
        if rec.dataset_ref is not None:
            item["dataset_ref"] = rec.dataset_ref
        holons.append(item)
    graphs = []
    for hid, rec in spec.records.items():
        if rec.kind is not HolonKind.NON_TERMINAL:
            continue
        graph = spec.graphs.get(hid, CommunicationGraph(hid))
        graphs.append(
            {
                "owner": [hid.level, hid.index],
                "edges": [
                    [[a.level, a.index], [b.level, b.index]] for a, b in graph.sorted_edges()
                ],
            }
        )
    return json.dumps({"holons": holons, "graphs": graphs}, indent=2) + "\n"
