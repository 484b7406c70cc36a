"""Core domain types and canonical serializations of structured summaries.

A structured summary is one of three variants: a single table, a list of
tables, or a mind map tree. All types are immutable value objects, safe to
share between concurrent workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace


class MindMapParseError(ValueError):
    """Raised when text cannot be parsed into a valid mind map tree."""


@dataclass(frozen=True)
class Passage:
    """A source text with a stable id and its cached sentence segmentation."""

    id: str
    text: str
    sentences: tuple[str, ...] = ()


@dataclass(frozen=True)
class Table:
    """A caption/header/rows triple.

    The header must be non-empty. Rows may be ragged (shorter or longer than
    the header); well-formedness is a separate judgement so that the global
    table critic has something to reject.
    """

    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...] = ()
    caption: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "header", tuple(self.header))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        if not self.header:
            raise ValueError("table header must be non-empty")

    @property
    def well_formed(self) -> bool:
        return all(len(r) == len(self.header) for r in self.rows)

    def to_json_dict(self) -> dict:
        return {
            "caption": self.caption,
            "header": list(self.header),
            "rows": [list(r) for r in self.rows],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> Table:
        return cls(header=tuple(d["header"]),
                   rows=tuple(tuple(r) for r in d["rows"]),
                   caption=d.get("caption", ""))


@dataclass(frozen=True)
class MindMapNode:
    """One node of a mind map tree; a tree by construction."""

    label: str
    children: tuple[MindMapNode, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))
        if not self.label.strip():
            raise ValueError("mind map node label must be non-empty")


SINGLE_TABLE = "single_table"
MULTI_TABLE = "multi_table"
MIND_MAP = "mind_map"


@dataclass(frozen=True)
class StructSum:
    """Tagged union over the three structured-summary variants."""

    kind: str
    source_passage_id: str
    table: Table | None = None
    tables: tuple[Table, ...] = ()
    root: MindMapNode | None = None

    @classmethod
    def single_table(cls, table: Table, passage_id: str) -> StructSum:
        return cls(kind=SINGLE_TABLE, source_passage_id=passage_id, table=table)

    @classmethod
    def multi_table(cls, tables, passage_id: str) -> StructSum:
        tables = tuple(tables)
        if not tables:
            raise ValueError("multi-table summary must contain at least one table")
        return cls(kind=MULTI_TABLE, source_passage_id=passage_id, tables=tables)

    @classmethod
    def mind_map(cls, root: MindMapNode, passage_id: str) -> StructSum:
        if root is None:
            raise ValueError("mind map summary must have a root")
        return cls(kind=MIND_MAP, source_passage_id=passage_id, root=root)

    @property
    def modality(self) -> str:
        return "mindmap" if self.kind == MIND_MAP else "table"

    def all_tables(self) -> tuple[Table, ...]:
        if self.kind == SINGLE_TABLE:
            return (self.table,)
        if self.kind == MULTI_TABLE:
            return self.tables
        return ()

    def to_json_dict(self) -> dict:
        if self.kind == SINGLE_TABLE:
            return {"kind": self.kind, "table": self.table.to_json_dict()}
        if self.kind == MULTI_TABLE:
            return {"kind": self.kind, "tables": [t.to_json_dict() for t in self.tables]}
        return {"kind": self.kind, "root": _node_to_obj(self.root)}

    @classmethod
    def from_json_dict(cls, d: dict, passage_id: str) -> StructSum:
        kind = d["kind"]
        if kind == SINGLE_TABLE:
            return cls.single_table(Table.from_json_dict(d["table"]), passage_id)
        if kind == MULTI_TABLE:
            return cls.multi_table([Table.from_json_dict(t) for t in d["tables"]], passage_id)
        if kind == MIND_MAP:
            return cls.mind_map(_node_from_obj(d["root"]), passage_id)
        raise ValueError(f"unknown structsum kind: {kind!r}")


QA_FILTER_STATES = ("raw", "deduped", "grounded", "cycle_checked", "rejected")


@dataclass(frozen=True)
class QAPair:
    """A question/answer pair with provenance and filter survival state.

    The filter state only moves forward through QA_FILTER_STATES; a rejected
    pair stays rejected and carries the reason.
    """

    question: str
    answer: str
    origin: str = "auto"  # auto | external
    filter_state: str = "raw"
    reject_reason: str | None = None

    def advanced(self, state: str) -> QAPair:
        """Return a copy at `state`, or self if already at or past it."""
        if self.filter_state == "rejected":
            return self
        cur = QA_FILTER_STATES.index(self.filter_state)
        new = QA_FILTER_STATES.index(state)
        if new <= cur:
            return self
        return replace(self, filter_state=state)

    def rejected(self, reason: str) -> QAPair:
        if self.filter_state == "rejected":
            return self
        return replace(self, filter_state="rejected", reject_reason=reason)


# --- table serialization ---------------------------------------------------


def _escape_cell(cell: str) -> str:
    # Markdown cells cannot contain raw newlines; pipes are escaped so the
    # text round-trips.
    return cell.replace("\n", " ").replace("|", "\\|")


def table_to_markdown(table: Table, warnings: list[str] | None = None) -> str:
    """Render a table as a pipe-delimited markdown block.

    Rows shorter than the header are padded with empty cells; any padding is
    reported through the optional `warnings` side channel. Output is
    byte-for-byte deterministic for equal inputs.
    """
    width = len(table.header)
    lines = [
        "| " + " | ".join(_escape_cell(h) for h in table.header) + " |",
        "| " + " | ".join("---" for _ in table.header) + " |",
    ]
    for i, row in enumerate(table.rows):
        cells = list(row)
        if len(cells) != width and warnings is not None:
            warnings.append(f"row {i} has {len(cells)} cells, header has {width}")
        if len(cells) < width:
            cells.extend("" for _ in range(width - len(cells)))
        lines.append("| " + " | ".join(_escape_cell(c) for c in cells) + " |")
    return "\n".join(lines)


# --- mind map serialization ------------------------------------------------


def _node_to_obj(node: MindMapNode) -> dict:
    return {"label": node.label, "children": [_node_to_obj(c) for c in node.children]}


def _node_from_obj(obj) -> MindMapNode:
    """Normalize a parsed JSON value into a MindMapNode.

    Accepts the canonical {"label": ..., "children": [...]} shape, the looser
    single-key {"<label>": [...]} shape, and bare strings as leaves.
    """
    if isinstance(obj, str):
        label = obj.strip()
        if not label:
            raise MindMapParseError("empty node label")
        return MindMapNode(label=label)
    if isinstance(obj, dict):
        if "label" in obj:
            label = str(obj["label"]).strip()
            if not label:
                raise MindMapParseError("empty node label")
            children = obj.get("children", [])
            if not isinstance(children, list):
                raise MindMapParseError("children must be a list")
            return MindMapNode(label=label, children=tuple(_node_from_obj(c) for c in children))
        if len(obj) == 1:
            (label, value), = obj.items()
            label = str(label).strip()
            if not label:
                raise MindMapParseError("empty node label")
            if isinstance(value, list):
                return MindMapNode(label=label, children=tuple(_node_from_obj(c) for c in value))
            if isinstance(value, (dict, str)):
                return MindMapNode(label=label, children=(_node_from_obj(value),))
            raise MindMapParseError(f"unsupported child value: {type(value).__name__}")
    raise MindMapParseError(f"unsupported node shape: {type(obj).__name__}")


def mindmap_to_json_text(root: MindMapNode) -> str:
    """Serialize a mind map as canonical compact JSON.

    Every node is an object with exactly the keys "label" and "children", in
    that order, with no insignificant whitespace. Round-trips through
    parse_mindmap_json.
    """
    return json.dumps(_node_to_obj(root), separators=(",", ":"), ensure_ascii=False)


def parse_mindmap_json(text: str) -> MindMapNode:
    """Parse JSON text into a mind map tree, normalizing tolerated shapes."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise MindMapParseError(f"invalid JSON: {e}") from e
    return _node_from_obj(obj)


def mindmap_to_toc(root: MindMapNode) -> str:
    """Render a mind map as a numbered table-of-contents outline.

    The root is "1. <label>"; its i-th child is "1.<i> <label>" indented two
    spaces per depth level, recursively.
    """
    lines: list[str] = []

    def walk(node: MindMapNode, number: tuple[int, ...], depth: int) -> None:
        prefix = ".".join(str(n) for n in number)
        if depth == 0:
            prefix += "."
        lines.append("  " * depth + f"{prefix} {node.label}")
        for i, child in enumerate(node.children, start=1):
            walk(child, number + (i,), depth + 1)

    walk(root, (1,), 0)
    return "\n".join(lines)


def mindmap_paths(root: MindMapNode) -> list[list[str]]:
    """Return every root-to-leaf label sequence, in preorder leaf order."""
    paths: list[list[str]] = []

    def walk(node: MindMapNode, prefix: list[str]) -> None:
        prefix = prefix + [node.label]
        if not node.children:
            paths.append(prefix)
            return
        for child in node.children:
            walk(child, prefix)

    walk(root, [])
    return paths


def mindmap_node_count(root: MindMapNode) -> int:
    return 1 + sum(mindmap_node_count(c) for c in root.children)


def mindmap_depth(root: MindMapNode) -> int:
    """Edges on the longest root-to-leaf path; a single node has depth 0."""
    if not root.children:
        return 0
    return 1 + max(mindmap_depth(c) for c in root.children)
