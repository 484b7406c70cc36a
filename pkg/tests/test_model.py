from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from structsum.model import (
    MindMapNode,
    MindMapParseError,
    QAPair,
    StructSum,
    Table,
    mindmap_depth,
    mindmap_node_count,
    mindmap_paths,
    mindmap_to_json_text,
    mindmap_to_toc,
    parse_mindmap_json,
    table_to_markdown,
)
from structsum.tablegen import parse_markdown_table

from conftest import random_table, random_tree

labels = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=12,
).filter(lambda s: s.strip())

trees = st.recursive(
    labels.map(lambda s: MindMapNode(label=s.strip())),
    lambda children: st.builds(
        lambda label, kids: MindMapNode(label=label.strip(), children=tuple(kids)),
        labels, st.lists(children, min_size=1, max_size=4)),
    max_leaves=20,
)


# --- tables ------------------------------------------------------------------


def test_table_to_markdown_basic():
    t = Table(header=("Name", "Role"), rows=(("Kay Daly", "creative director"),))
    assert table_to_markdown(t) == (
        "| Name | Role |\n| --- | --- |\n| Kay Daly | creative director |")


def test_table_to_markdown_empty_rows():
    t = Table(header=("A",))
    assert table_to_markdown(t) == "| A |\n| --- |"


def test_table_to_markdown_line_count_matches_shape():
    t = Table(header=("a", "b", "c"), rows=tuple(
        (f"r{i}1", f"r{i}2", f"r{i}3") for i in range(7)))
    assert len(table_to_markdown(t).splitlines()) == 9


def test_table_to_markdown_pads_ragged_rows_with_side_channel():
    t = Table(header=("a", "b"), rows=(("only",),))
    warnings: list[str] = []
    md = table_to_markdown(t, warnings=warnings)
    assert md.splitlines()[2] == "| only |  |"
    assert warnings and "row 0" in warnings[0]


def test_table_to_markdown_escapes_pipes_and_round_trips():
    t = Table(header=("a|b", "c"), rows=(("1|2", "3"),))
    md = table_to_markdown(t)
    assert "\\|" in md
    assert parse_markdown_table(md) == Table(header=t.header, rows=t.rows)


def test_table_requires_nonempty_header():
    with pytest.raises(ValueError):
        Table(header=())


def test_table_markdown_deterministic_and_distinct():
    t1 = Table(header=("a",), rows=(("1",),))
    t2 = Table(header=("a",), rows=(("2",),))
    assert table_to_markdown(t1) == table_to_markdown(t1)
    assert table_to_markdown(t1) != table_to_markdown(t2)


def test_table_round_trip_seeded_corpus():
    rng = random.Random(7)
    for _ in range(200):
        t = random_table(rng)
        parsed = parse_markdown_table(table_to_markdown(t))
        assert parsed == Table(header=t.header, rows=t.rows)


# --- mind maps ---------------------------------------------------------------


def test_mindmap_json_leaf():
    assert mindmap_to_json_text(MindMapNode("Kay Daly")) == '{"label":"Kay Daly","children":[]}'


def test_mindmap_json_preserves_child_order():
    tree = MindMapNode("root", (MindMapNode("first"), MindMapNode("second")))
    parsed = parse_mindmap_json(mindmap_to_json_text(tree))
    assert [c.label for c in parsed.children] == ["first", "second"]


def test_parse_mindmap_normalizes_single_key_shape():
    parsed = parse_mindmap_json('{"Kay Daly": ["Career", {"Family": ["Sisters"]}]}')
    assert parsed == MindMapNode("Kay Daly", (
        MindMapNode("Career"),
        MindMapNode("Family", (MindMapNode("Sisters"),)),
    ))


def test_parse_mindmap_rejects_garbage():
    for bad in ["not json", "[]", '{"label": "  "}', '{"a": 1}', '{"label": "x", "children": 3}']:
        with pytest.raises(MindMapParseError):
            parse_mindmap_json(bad)


@settings(max_examples=150, deadline=None)
@given(trees)
def test_mindmap_json_round_trip_property(tree):
    assert parse_mindmap_json(mindmap_to_json_text(tree)) == tree


def test_mindmap_toc_leaf_and_two_children():
    assert mindmap_to_toc(MindMapNode("X")) == "1. X"
    toc = mindmap_to_toc(MindMapNode("A", (MindMapNode("B"), MindMapNode("C"))))
    assert toc == "1. A\n  1.1 B\n  1.2 C"


def _count_nodes_walk(node: MindMapNode) -> int:
    # Independent oracle: explicit stack walk.
    stack, seen = [node], 0
    while stack:
        n = stack.pop()
        seen += 1
        stack.extend(n.children)
    return seen


def _count_leaves_walk(node: MindMapNode) -> int:
    if not node.children:
        return 1
    return sum(_count_leaves_walk(c) for c in node.children)


def test_mindmap_toc_line_count_equals_node_count():
    rng = random.Random(3)
    for _ in range(30):
        tree = random_tree(rng)
        assert len(mindmap_to_toc(tree).splitlines()) == _count_nodes_walk(tree)


@settings(max_examples=150, deadline=None)
@given(trees)
def test_mindmap_toc_numbering_unique(tree):
    lines = mindmap_to_toc(tree).splitlines()
    prefixes = [line.strip().split(" ", 1)[0] for line in lines]
    assert len(prefixes) == len(set(prefixes)) == _count_nodes_walk(tree)


def test_mindmap_paths_leaf_and_fanout():
    assert mindmap_paths(MindMapNode("r")) == [["r"]]
    tree = MindMapNode("r", (MindMapNode("a"), MindMapNode("b"), MindMapNode("c")))
    paths = mindmap_paths(tree)
    assert len(paths) == 3
    assert all(len(p) == 2 for p in paths)


@settings(max_examples=150, deadline=None)
@given(trees)
def test_mindmap_paths_count_equals_leaf_count(tree):
    assert len(mindmap_paths(tree)) == _count_leaves_walk(tree)


def test_mindmap_paths_random_tree_against_oracle():
    rng = random.Random(20)
    tree = random_tree(rng, max_children=3, max_depth=4)
    assert len(mindmap_paths(tree)) == _count_leaves_walk(tree)


def test_depth_and_node_count_conventions():
    assert mindmap_depth(MindMapNode("x")) == 0
    assert mindmap_node_count(MindMapNode("x")) == 1
    tree = MindMapNode("a", (MindMapNode("b", (MindMapNode("c"),)),))
    assert mindmap_depth(tree) == 2
    assert mindmap_node_count(tree) == 3


# --- struct sums and QA pairs --------------------------------------------------


def test_structsum_variants_and_json_round_trip():
    table = Table(header=("a",), rows=(("1",),))
    tree = MindMapNode("r", (MindMapNode("x"),))
    for summary in (
        StructSum.single_table(table, "p1"),
        StructSum.multi_table([table, table], "p1"),
        StructSum.mind_map(tree, "p1"),
    ):
        parsed = StructSum.from_json_dict(summary.to_json_dict(), "p1")
        assert parsed == summary
    assert StructSum.single_table(table, "p").modality == "table"
    assert StructSum.mind_map(tree, "p").modality == "mindmap"


def test_structsum_multi_table_rejects_empty():
    with pytest.raises(ValueError):
        StructSum.multi_table([], "p1")


def test_qapair_filter_state_moves_forward_only():
    pair = QAPair(question="Who?", answer="Kay")
    deduped = pair.advanced("deduped")
    cycle = deduped.advanced("grounded").advanced("cycle_checked")
    assert cycle.filter_state == "cycle_checked"
    # Re-advancing to an earlier state is a no-op, never a regression.
    assert cycle.advanced("deduped") is cycle
    rejected = deduped.rejected("grounding")
    assert rejected.filter_state == "rejected"
    assert rejected.reject_reason == "grounding"
    assert rejected.advanced("cycle_checked") is rejected
