"""Iterative mind-map generation.

The loop generates a root concept, then repeatedly asks whether to continue;
each continued step samples several expansions of the whole map, keeps the
topmost parsable candidate that preserves the root label, and falls back to
one JSON-repair attempt when none parses.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .llm import LlmGateway, Trace, parse_yes_no, record_trace
from .model import MindMapNode, MindMapParseError, Passage, mindmap_to_json_text, parse_mindmap_json
from .prompts import TemplateRegistry

logger = logging.getLogger(__name__)

CONTINUE_NO = "continue_no"
MAX_STEPS = "max_steps"
EXPANSION_REJECTED = "expansion_rejected"
IN_PROGRESS = "in_progress"

_FENCE_RE = re.compile(r"^```[a-zA-Z0-9]*\s*|\s*```$")


class RootGenerationFailed(RuntimeError):
    """No sample yielded a usable root concept."""


class ExpansionRejected(RuntimeError):
    """No expansion candidate (nor its repair) produced an acceptable tree."""


@dataclass(frozen=True)
class IterationState:
    step: int
    mindmap: MindMapNode
    max_steps: int
    terminated_by: str


def _strip_fences(text: str) -> str:
    return _FENCE_RE.sub("", text.strip()).strip()


def try_parse_candidate(text: str) -> MindMapNode | None:
    """Parse a model completion into a tree, tolerating code fences and
    surrounding chatter; None when nothing parses."""
    cleaned = _strip_fences(text)
    attempts = [cleaned]
    start, end = cleaned.find("{"), cleaned.rfind("}")
    if 0 <= start < end:
        attempts.append(cleaned[start:end + 1])
    for attempt in attempts:
        try:
            return parse_mindmap_json(attempt)
        except MindMapParseError:
            continue
    return None


def generate_root(passage: Passage, gateway: LlmGateway, registry: TemplateRegistry,
                  sample_count: int = 1, trace: Trace | None = None) -> MindMapNode:
    """Generate the central concept as a single-node tree.

    The topmost parsable sample wins; a plain-text sample is accepted as a
    bare label. Raises RootGenerationFailed when no sample is usable.
    """
    prompt = registry.render("mindmap.root", {"passage": passage.text})
    resp = gateway.ask("mindmap.root", prompt, sample_count=sample_count)
    record_trace(trace, prompt, resp.samples)
    for sample in resp.samples:
        cleaned = _strip_fences(sample)
        if cleaned.startswith("{") or cleaned.startswith("["):
            node = try_parse_candidate(sample)
            if node is not None:
                return MindMapNode(label=node.label)
            continue
        for line in cleaned.splitlines():
            if line.strip():
                return MindMapNode(label=line.strip())
    raise RootGenerationFailed(f"no usable root sample for passage {passage.id}")


def should_continue(passage: Passage, mindmap: MindMapNode, gateway: LlmGateway,
                    registry: TemplateRegistry, trace: Trace | None = None) -> bool:
    """Ask whether the map should be expanded; unrecognized answers
    terminate conservatively."""
    prompt = registry.render("mindmap.continue", {
        "passage": passage.text,
        "mindmap": mindmap_to_json_text(mindmap),
    })
    resp = gateway.ask("mindmap.continue", prompt)
    record_trace(trace, prompt, resp.samples)
    return parse_yes_no(resp.samples[0], default=False, context="mindmap.continue")


def expand(passage: Passage, mindmap: MindMapNode, gateway: LlmGateway,
           registry: TemplateRegistry, sample_count: int,
           trace: Trace | None = None) -> list[str]:
    """Sample `sample_count` expanded-map candidates in one LLM call."""
    prompt = registry.render("mindmap.expand", {
        "passage": passage.text,
        "mindmap": mindmap_to_json_text(mindmap),
    })
    resp = gateway.ask("mindmap.expand", prompt, sample_count=sample_count)
    record_trace(trace, prompt, resp.samples)
    return list(resp.samples)


def _root_preserved(node: MindMapNode, expected_root: str | None) -> bool:
    if expected_root is None:
        return True
    return node.label.strip().casefold() == expected_root.strip().casefold()


def select_or_repair(candidates: list[str], gateway: LlmGateway, registry: TemplateRegistry,
                     expected_root: str | None = None, trace: Trace | None = None) -> MindMapNode:
    """Pick the topmost candidate that parses to a valid tree keeping the
    root label; when none parses, run one JSON-repair attempt on the first
    candidate."""
    if not candidates:
        raise ValueError("candidates must be non-empty")
    for candidate in candidates:
        node = try_parse_candidate(candidate)
        if node is not None and _root_preserved(node, expected_root):
            return node
    prompt = registry.render("mindmap.json_repair", {"candidate": candidates[0]})
    resp = gateway.ask("mindmap.json_repair", prompt)
    record_trace(trace, prompt, resp.samples)
    node = try_parse_candidate(resp.samples[0])
    if node is not None and _root_preserved(node, expected_root):
        return node
    raise ExpansionRejected("no candidate or repaired output yielded an acceptable tree")


def iterative_generate(passage: Passage, gateway: LlmGateway, registry: TemplateRegistry,
                       max_steps: int = 5, sample_count: int = 4,
                       trace: Trace | None = None) -> tuple[MindMapNode, IterationState]:
    """Run the iterative generation loop.

    Starting from the generated root, each step first asks whether to
    continue; a yes answer triggers one sampled expansion whose selected
    candidate replaces the map. The loop ends on a no answer, on a rejected
    expansion (keeping the last good map), or after max_steps steps.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    mindmap = generate_root(passage, gateway, registry, trace=trace)
    root_label = mindmap.label
    step = 0
    while step < max_steps:
        step += 1
        if should_continue(passage, mindmap, gateway, registry, trace=trace):
            candidates = expand(passage, mindmap, gateway, registry, sample_count, trace=trace)
            try:
                mindmap = select_or_repair(candidates, gateway, registry,
                                           expected_root=root_label, trace=trace)
            except ExpansionRejected:
                logger.warning("expansion rejected for passage %s at step %d", passage.id, step)
                return mindmap, IterationState(step, mindmap, max_steps, EXPANSION_REJECTED)
        else:
            return mindmap, IterationState(step, mindmap, max_steps, CONTINUE_NO)
    return mindmap, IterationState(step, mindmap, max_steps, MAX_STEPS)
