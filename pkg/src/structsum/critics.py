"""Critic suite for generated summaries.

Three pass/fail dimensions are checked for both modalities: factuality via
post-attribution citations, local structure per column/path, and global
structure (a pure heuristic for tables, one model call for mind maps).
Instances are filtered on the logical AND of all three verdicts.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .llm import LlmGateway, Trace, parse_yes_no, record_trace
from .model import (
    MIND_MAP,
    MindMapNode,
    Passage,
    StructSum,
    Table,
    mindmap_paths,
    mindmap_to_toc,
    table_to_markdown,
)
from .prompts import TemplateRegistry

FACTUALITY = "factuality"
LOCAL_STRUCTURE = "local_structure"
GLOBAL_STRUCTURE = "global_structure"
ALL_CRITICS = (FACTUALITY, LOCAL_STRUCTURE, GLOBAL_STRUCTURE)

_BRACKET_RE = re.compile(r"\[([^\[\]]*)\]")


class IncompleteVerdictSet(ValueError):
    """combine() needs one verdict per critic dimension."""


@dataclass(frozen=True)
class Verdict:
    """One critic's decision plus machine-readable evidence.

    `evidence["failures"]` lists the offending units (rows, columns, paths,
    tables); the verdict passes exactly when that list is empty.
    """

    critic: str
    modality: str
    passed: bool
    evidence: dict

    @classmethod
    def make(cls, critic: str, modality: str, evidence: dict) -> Verdict:
        return cls(critic=critic, modality=modality,
                   passed=not evidence.get("failures"), evidence=evidence)

    def to_json_dict(self) -> dict:
        return {"critic": self.critic, "modality": self.modality,
                "passed": self.passed, "evidence": self.evidence}

    @classmethod
    def from_json_dict(cls, d: dict) -> Verdict:
        return cls(critic=d["critic"], modality=d["modality"],
                   passed=d["passed"], evidence=d["evidence"])


@dataclass(frozen=True)
class AttributionCitation:
    """Sentence citations for one attributed unit (row or path)."""

    unit_id: int
    cited: tuple[int, ...] | None  # None encodes NA
    note: str = ""

    @property
    def valid(self) -> bool:
        return self.cited is not None and len(self.cited) > 0

    def to_json_dict(self) -> dict:
        return {"unit": self.unit_id,
                "cited": list(self.cited) if self.cited is not None else None,
                "note": self.note}


def parse_citations(response_text: str, unit_count: int,
                    sentence_count: int) -> list[AttributionCitation]:
    """Extract one bracketed citation per unit, in order.

    "[x,y]" parses to the listed 1-based sentence indices and "[NA]" to NA.
    Out-of-range or unparsable groups, and missing trailing groups, are
    treated as NA with a note (conservative fail).
    """
    groups = _BRACKET_RE.findall(response_text)
    citations: list[AttributionCitation] = []
    for unit in range(unit_count):
        if unit >= len(groups):
            citations.append(AttributionCitation(unit, None, "missing"))
            continue
        group = groups[unit].strip()
        if group.upper() == "NA":
            citations.append(AttributionCitation(unit, None))
            continue
        try:
            indices = tuple(int(part.strip()) for part in group.split(",") if part.strip())
        except ValueError:
            citations.append(AttributionCitation(unit, None, f"unparsable: [{group}]"))
            continue
        if not indices:
            citations.append(AttributionCitation(unit, None, "empty citation"))
        elif any(i < 1 or i > sentence_count for i in indices):
            citations.append(AttributionCitation(unit, None, f"out of range: [{group}]"))
        else:
            citations.append(AttributionCitation(unit, indices))
    return citations


def _factuality_evidence(citations: list[AttributionCitation]) -> dict:
    return {
        "citations": [c.to_json_dict() for c in citations],
        "failures": [c.unit_id for c in citations if not c.valid],
    }


def critic_factuality_table(passage: Passage, table: Table, gateway: LlmGateway,
                            registry: TemplateRegistry, trace: Trace | None = None) -> Verdict:
    """Attribute each row to source sentences in one LLM call; every row must
    receive a valid non-NA citation."""
    prompt = registry.render("critic.factuality.table", {
        "sentences": list(passage.sentences),
        "table": table_to_markdown(table),
    })
    resp = gateway.ask("critic.factuality.table", prompt)
    record_trace(trace, prompt, resp.samples)
    citations = parse_citations(resp.samples[0], len(table.rows), len(passage.sentences))
    return Verdict.make(FACTUALITY, "table", _factuality_evidence(citations))


def critic_factuality_mindmap(passage: Passage, root: MindMapNode, gateway: LlmGateway,
                              registry: TemplateRegistry, trace: Trace | None = None) -> Verdict:
    """Attribute each root-to-leaf path in one LLM call."""
    paths = mindmap_paths(root)
    prompt = registry.render("critic.factuality.mindmap", {
        "sentences": list(passage.sentences),
        "paths": [" -> ".join(p) for p in paths],
    })
    resp = gateway.ask("critic.factuality.mindmap", prompt)
    record_trace(trace, prompt, resp.samples)
    citations = parse_citations(resp.samples[0], len(paths), len(passage.sentences))
    return Verdict.make(FACTUALITY, "mindmap", _factuality_evidence(citations))


def critic_local_table(table: Table, gateway: LlmGateway, registry: TemplateRegistry,
                       trace: Trace | None = None) -> Verdict:
    """One LLM call per column: do all cell values belong to the header's
    category?"""
    columns = []
    failures = []
    for index, name in enumerate(table.header):
        cells = [row[index] if index < len(row) else "" for row in table.rows]
        prompt = registry.render("critic.local.table", {"column": name, "cells": cells})
        resp = gateway.ask("critic.local.table", prompt)
        record_trace(trace, prompt, resp.samples)
        ok = parse_yes_no(resp.samples[0], default=False, context=f"column {name!r}")
        columns.append({"index": index, "name": name, "passed": ok})
        if not ok:
            failures.append(index)
    return Verdict.make(LOCAL_STRUCTURE, "table", {"columns": columns, "failures": failures})


def critic_local_mindmap(root: MindMapNode, gateway: LlmGateway, registry: TemplateRegistry,
                         trace: Trace | None = None) -> Verdict:
    """One LLM call per root-to-leaf path: is the terminal node a specific
    value rather than a general concept?"""
    paths = mindmap_paths(root)
    results = []
    failures = []
    for index, path in enumerate(paths):
        prompt = registry.render("critic.local.mindmap", {
            "path": " -> ".join(path),
            "terminal": path[-1],
        })
        resp = gateway.ask("critic.local.mindmap", prompt)
        record_trace(trace, prompt, resp.samples)
        ok = parse_yes_no(resp.samples[0], default=False, context=f"path {index}")
        results.append({"index": index, "path": path, "passed": ok})
        if not ok:
            failures.append(index)
    return Verdict.make(LOCAL_STRUCTURE, "mindmap", {"paths": results, "failures": failures})


def critic_global_table(table: Table) -> Verdict:
    """Pure well-formedness heuristics, no LLM call: non-empty header, at
    least one data row, every row as wide as the header, no fully-empty row."""
    failures: list[dict] = []
    if not table.header:
        failures.append({"kind": "empty_header"})
    if not table.rows:
        failures.append({"kind": "no_rows"})
    for i, row in enumerate(table.rows):
        if len(row) != len(table.header):
            failures.append({"kind": "ragged_row", "row": i})
        if row and all(not cell.strip() for cell in row):
            failures.append({"kind": "empty_row", "row": i})
    return Verdict.make(GLOBAL_STRUCTURE, "table", {"failures": failures})


def critic_global_mindmap(passage: Passage, root: MindMapNode, gateway: LlmGateway,
                          registry: TemplateRegistry, trace: Trace | None = None) -> Verdict:
    """One LLM call judging the map's table-of-contents rendering against the
    passage."""
    prompt = registry.render("critic.global.mindmap", {
        "passage": passage.text,
        "toc": mindmap_to_toc(root),
    })
    resp = gateway.ask("critic.global.mindmap", prompt)
    record_trace(trace, prompt, resp.samples)
    ok = parse_yes_no(resp.samples[0], default=False, context="global mindmap")
    return Verdict.make(GLOBAL_STRUCTURE, "mindmap",
                        {"answer": resp.samples[0].strip(), "failures": [] if ok else ["toc"]})


def _merge_table_verdicts(critic: str, verdicts: list[Verdict]) -> Verdict:
    evidence = {
        "tables": [v.evidence for v in verdicts],
        "failures": [i for i, v in enumerate(verdicts) if not v.passed],
    }
    return Verdict.make(critic, "table", evidence)


def critique_structsum(passage: Passage, summary: StructSum, gateway: LlmGateway,
                       registry: TemplateRegistry, trace: Trace | None = None) -> list[Verdict]:
    """Run all three critics for one summary.

    Tables in a multi-table summary are critiqued independently and the
    instance verdict for each dimension is the AND over member tables.
    Critics run in a fixed order: factuality, local, global.
    """
    if summary.kind == MIND_MAP:
        return [
            critic_factuality_mindmap(passage, summary.root, gateway, registry, trace),
            critic_local_mindmap(summary.root, gateway, registry, trace),
            critic_global_mindmap(passage, summary.root, gateway, registry, trace),
        ]
    tables = summary.all_tables()
    fact = [critic_factuality_table(passage, t, gateway, registry, trace) for t in tables]
    local = [critic_local_table(t, gateway, registry, trace) for t in tables]
    glob = [critic_global_table(t) for t in tables]
    return [
        _merge_table_verdicts(FACTUALITY, fact),
        _merge_table_verdicts(LOCAL_STRUCTURE, local),
        _merge_table_verdicts(GLOBAL_STRUCTURE, glob),
    ]


def combine(verdicts: list[Verdict]) -> bool:
    """Logical AND over the full critic set for one instance."""
    present = {v.critic for v in verdicts}
    if present != set(ALL_CRITICS):
        missing = set(ALL_CRITICS) - present
        extra = present - set(ALL_CRITICS)
        raise IncompleteVerdictSet(f"missing={sorted(missing)} extra={sorted(extra)}")
    return all(v.passed for v in verdicts)


def critic_call_cost(summary: StructSum) -> dict[str, int]:
    """Predicted LLM calls per critic: factuality is one call per instance
    (per table for multi-table), local structure one per column/path, global
    structure zero for tables and one for mind maps."""
    if summary.kind == MIND_MAP:
        return {
            FACTUALITY: 1,
            LOCAL_STRUCTURE: len(mindmap_paths(summary.root)),
            GLOBAL_STRUCTURE: 1,
        }
    tables = summary.all_tables()
    return {
        FACTUALITY: len(tables),
        LOCAL_STRUCTURE: sum(len(t.header) for t in tables),
        GLOBAL_STRUCTURE: 0,
    }
