from __future__ import annotations

import json

import pytest

from structsum.llm import ScriptExhausted
from structsum.mindmapgen import (
    CONTINUE_NO,
    EXPANSION_REJECTED,
    ExpansionRejected,
    MAX_STEPS,
    RootGenerationFailed,
    expand,
    generate_root,
    iterative_generate,
    select_or_repair,
    should_continue,
    try_parse_candidate,
)
from structsum.model import MindMapNode, mindmap_to_json_text, parse_mindmap_json
from structsum.textproc import make_passage

from conftest import replay_gateway

ROOT_JSON = '{"label":"Kay Daly","children":[]}'
EXPANDED_JSON = ('{"label":"Kay Daly","children":[{"label":"Career","children":[]},'
                 '{"label":"Family","children":[]}]}')


@pytest.fixture()
def passage():
    return make_passage("kay", "Kay Daly was an advertising executive. She joined Revlon in 1961.")


def test_generate_root_from_json_sample(passage, registry):
    gateway = replay_gateway([("mindmap.root", [ROOT_JSON])])
    root = generate_root(passage, gateway, registry)
    assert root == MindMapNode("Kay Daly")


def test_generate_root_bare_label_fallback(passage, registry):
    gateway = replay_gateway([("mindmap.root", ["Kay Daly"])])
    assert generate_root(passage, gateway, registry).label == "Kay Daly"


def test_generate_root_topmost_parsable_wins(passage, registry):
    gateway = replay_gateway([("mindmap.root", ['{"label": "broken', ROOT_JSON])])
    root = generate_root(passage, gateway, registry, sample_count=2)
    assert root.label == "Kay Daly"


def test_generate_root_keeps_label_only(passage, registry):
    gateway = replay_gateway([("mindmap.root", [EXPANDED_JSON])])
    assert generate_root(passage, gateway, registry) == MindMapNode("Kay Daly")


def test_generate_root_all_unusable_raises(passage, registry):
    gateway = replay_gateway([("mindmap.root", ['{"label": "broken', "   "])])
    with pytest.raises(RootGenerationFailed):
        generate_root(passage, gateway, registry, sample_count=2)


def test_should_continue_parsing(passage, registry):
    root = MindMapNode("Kay Daly")
    for reply, expected in [("Yes", True), ("no, the mind map is complete", False),
                            ("maybe", False)]:
        gateway = replay_gateway([("mindmap.continue", [reply])])
        assert should_continue(passage, root, gateway, registry) is expected


def test_expand_one_call_regardless_of_k(passage, registry):
    root = MindMapNode("Kay Daly")
    gateway = replay_gateway([("mindmap.expand", ["c1", "c2", "c3", "c4"])])
    candidates = expand(passage, root, gateway, registry, sample_count=4)
    assert candidates == ["c1", "c2", "c3", "c4"]
    assert gateway.ledger.snapshot() == {"mindmap.expand": 1}

    gateway = replay_gateway([("mindmap.expand", ["c1"])])
    assert expand(passage, root, gateway, registry, sample_count=1) == ["c1"]
    assert gateway.ledger.snapshot() == {"mindmap.expand": 1}


def test_try_parse_candidate_tolerates_fences_and_chatter():
    fenced = f"```json\n{EXPANDED_JSON}\n```"
    assert try_parse_candidate(fenced) == parse_mindmap_json(EXPANDED_JSON)
    chatty = f"Sure! Here is the map:\n{EXPANDED_JSON}"
    assert try_parse_candidate(chatty) == parse_mindmap_json(EXPANDED_JSON)
    assert try_parse_candidate("not json at all") is None


def test_select_or_repair_topmost_rule(registry):
    gateway = replay_gateway([])
    tree = select_or_repair(["{broken", EXPANDED_JSON, ROOT_JSON], gateway, registry,
                            expected_root="Kay Daly")
    assert tree == parse_mindmap_json(EXPANDED_JSON)
    assert gateway.ledger.total() == 0  # no repair call needed


def test_select_or_repair_single_good_candidate(registry):
    gateway = replay_gateway([])
    assert select_or_repair([ROOT_JSON], gateway, registry) == MindMapNode("Kay Daly")


def test_select_or_repair_repair_path_counts_one_call(registry):
    gateway = replay_gateway([("mindmap.json_repair", [EXPANDED_JSON])])
    tree = select_or_repair(["{broken", "also broken"], gateway, registry,
                            expected_root="Kay Daly")
    assert tree == parse_mindmap_json(EXPANDED_JSON)
    assert gateway.ledger.snapshot() == {"mindmap.json_repair": 1}


def test_select_or_repair_rejects_root_rename(registry):
    renamed = '{"label":"Someone Else","children":[]}'
    gateway = replay_gateway([("mindmap.json_repair", [renamed])])
    with pytest.raises(ExpansionRejected):
        select_or_repair([renamed], gateway, registry, expected_root="Kay Daly")


def test_select_or_repair_failed_repair_raises(registry):
    gateway = replay_gateway([("mindmap.json_repair", ["still broken {"])])
    with pytest.raises(ExpansionRejected):
        select_or_repair(["{broken"], gateway, registry, expected_root="Kay Daly")


def test_iterative_continue_no_at_step_one(passage, registry):
    gateway = replay_gateway([
        ("mindmap.root", [ROOT_JSON]),
        ("mindmap.continue", ["no"]),
    ])
    tree, state = iterative_generate(passage, gateway, registry, max_steps=5)
    assert tree == MindMapNode("Kay Daly")
    assert (state.step, state.terminated_by) == (1, CONTINUE_NO)
    assert gateway.ledger.snapshot() == {"mindmap.root": 1, "mindmap.continue": 1}


def test_iterative_max_steps_exhaustion(passage, registry):
    script = [("mindmap.root", [ROOT_JSON])]
    for _ in range(3):
        script.append(("mindmap.continue", ["yes"]))
        script.append(("mindmap.expand", [EXPANDED_JSON]))
    gateway = replay_gateway(script)
    tree, state = iterative_generate(passage, gateway, registry, max_steps=3, sample_count=1)
    assert (state.step, state.terminated_by) == (3, MAX_STEPS)
    assert gateway.ledger.snapshot() == {
        "mindmap.root": 1, "mindmap.continue": 3, "mindmap.expand": 3}
    assert tree == parse_mindmap_json(EXPANDED_JSON)


def test_iterative_full_trace_ledger(passage, registry):
    # root, continue=yes, expand, continue=no: hand-traced 4 ledger increments.
    gateway = replay_gateway([
        ("mindmap.root", [ROOT_JSON]),
        ("mindmap.continue", ["yes"]),
        ("mindmap.expand", [EXPANDED_JSON]),
        ("mindmap.continue", ["no"]),
    ])
    tree, state = iterative_generate(passage, gateway, registry, max_steps=5, sample_count=1)
    assert gateway.ledger.total() == 4
    assert (state.step, state.terminated_by) == (2, CONTINUE_NO)


def test_iterative_expansion_rejection_keeps_last_good(passage, registry):
    gateway = replay_gateway([
        ("mindmap.root", [ROOT_JSON]),
        ("mindmap.continue", ["yes"]),
        ("mindmap.expand", [EXPANDED_JSON]),
        ("mindmap.continue", ["yes"]),
        ("mindmap.expand", ["{broken"]),
        ("mindmap.json_repair", ["{still broken"]),
    ])
    tree, state = iterative_generate(passage, gateway, registry, max_steps=5, sample_count=1)
    assert tree == parse_mindmap_json(EXPANDED_JSON)
    assert (state.step, state.terminated_by) == (2, EXPANSION_REJECTED)


def test_iterative_kay_daly_golden_tree(kay_daly_passage, registry):
    golden = MindMapNode("Kay Daly", (
        MindMapNode("Advertising career", (
            MindMapNode("Maidenform I Dreamed campaign"),
            MindMapNode("Revlon Fire And Ice, 1952"),
            MindMapNode("Revlon vice president, 1961"),
        )),
        MindMapNode("Family", (
            MindMapNode("One of four Daly sisters"),
            MindMapNode("Married Warren Leslie"),
        )),
        MindMapNode("Life", (
            MindMapNode("Born County Tyrone, 1919"),
            MindMapNode("Died October 16, 1975"),
        )),
    ))
    expanded = json.dumps(
        {"label": "Kay Daly", "children": [
            {"label": c.label, "children": [
                {"label": g.label, "children": []} for g in c.children]}
            for c in golden.children]})
    gateway = replay_gateway([
        ("mindmap.root", [ROOT_JSON]),
        ("mindmap.continue", ["yes"]),
        ("mindmap.expand", [expanded]),
        ("mindmap.continue", ["no"]),
    ])
    tree, _ = iterative_generate(kay_daly_passage, gateway, registry, sample_count=1)
    assert tree == golden
    assert mindmap_to_json_text(tree) == mindmap_to_json_text(golden)


def test_iterative_deterministic_with_fixed_script(passage, registry):
    script = [
        ("mindmap.root", [ROOT_JSON]),
        ("mindmap.continue", ["yes"]),
        ("mindmap.expand", ["{broken", EXPANDED_JSON]),
        ("mindmap.continue", ["no"]),
    ]

    def run():
        gateway = replay_gateway(script)
        tree, state = iterative_generate(passage, gateway, registry, max_steps=4,
                                         sample_count=2)
        return mindmap_to_json_text(tree), state.terminated_by, gateway.ledger.snapshot()

    assert run() == run()


def test_root_failure_propagates(passage, registry):
    gateway = replay_gateway([])
    with pytest.raises(ScriptExhausted):
        iterative_generate(passage, gateway, registry)


def test_returned_map_always_serializes(passage, registry):
    gateway = replay_gateway([
        ("mindmap.root", [ROOT_JSON]),
        ("mindmap.continue", ["yes"]),
        ("mindmap.expand", [EXPANDED_JSON]),
        ("mindmap.continue", ["no"]),
    ])
    tree, _ = iterative_generate(passage, gateway, registry, sample_count=1)
    assert parse_mindmap_json(mindmap_to_json_text(tree)) == tree
