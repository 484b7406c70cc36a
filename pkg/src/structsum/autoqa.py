"""QA-based semantic coverage.

Question-answer pairs are generated from the passage, filtered in three
stages (string dedup, answer grounding, cyclic consistency), and each
survivor is answered again from the structured summary alone. Coverage is
the fraction of survivors answered equivalently; with zero survivors the
coverage is undefined and excluded from aggregates.
"""

from __future__ import annotations

import logging
import re

from dataclasses import dataclass

from .llm import BackendError, LlmGateway, Trace, parse_yes_no, record_trace
from .model import MIND_MAP, QAPair, Passage, StructSum, mindmap_to_json_text, table_to_markdown
from .prompts import TemplateRegistry

logger = logging.getLogger(__name__)

DEFAULT_QA_COUNT = 10

_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class CoverageResult:
    """Coverage of one summary: `value` is answered_equivalent /
    surviving_pairs, or None (undefined) when nothing survived the filter."""

    passage_id: str
    surviving_pairs: int
    answered_equivalent: int
    value: float | None

    def __post_init__(self) -> None:
        if (self.value is None) != (self.surviving_pairs == 0):
            raise ValueError("coverage is defined exactly when pairs survived")


def gen_qa(passage: Passage, gateway: LlmGateway, registry: TemplateRegistry,
           count: int = DEFAULT_QA_COUNT, trace: Trace | None = None) -> list[QAPair]:
    """Generate raw QA pairs from the passage in one LLM call.

    The response is parsed as alternating "Q: ..." / "A: ..." lines; anything
    malformed is skipped. An empty result is not an error.
    """
    prompt = registry.render("autoqa.genqa", {"passage": passage.text, "count": count})
    resp = gateway.ask("autoqa.genqa", prompt)
    record_trace(trace, prompt, resp.samples)
    pairs: list[QAPair] = []
    question: str | None = None
    for line in resp.samples[0].splitlines():
        line = line.strip()
        if line.lower().startswith("q:"):
            question = line[2:].strip()
        elif line.lower().startswith("a:") and question:
            answer = line[2:].strip()
            if answer:
                pairs.append(QAPair(question=question, answer=answer, origin="auto"))
            question = None
    return pairs


def _word_tokens(text: str) -> set[str]:
    return set(_WORD_RE.findall(text.casefold()))


def _dedupe_key(question: str) -> str:
    return " ".join(question.casefold().split())


def filter_qa_detailed(passage: Passage, pairs: list[QAPair], gateway: LlmGateway,
                       registry: TemplateRegistry,
                       trace: Trace | None = None) -> tuple[list[QAPair], list[QAPair]]:
    """Run the three-stage filter; returns (survivors, rejected).

    Stage 1 deduplicates questions by case-folded string match (first one
    wins). Stage 2 drops a pair when none of the answer's word tokens occur
    in the passage. Stage 3 re-answers the question from the passage and
    keeps the pair only when the regenerated answer is equivalent to the
    original.
    """
    survivors: list[QAPair] = []
    rejected: list[QAPair] = []

    seen: set[str] = set()
    deduped: list[QAPair] = []
    for pair in pairs:
        key = _dedupe_key(pair.question)
        if key in seen:
            rejected.append(pair.rejected("duplicate"))
            continue
        seen.add(key)
        deduped.append(pair.advanced("deduped"))

    passage_tokens = _word_tokens(passage.text)
    grounded: list[QAPair] = []
    for pair in deduped:
        if _word_tokens(pair.answer) & passage_tokens:
            grounded.append(pair.advanced("grounded"))
        else:
            rejected.append(pair.rejected("grounding"))

    for pair in grounded:
        try:
            regenerated = _answer_from_text(passage.text, pair.question, gateway, registry,
                                            tag="autoqa.cycle", trace=trace)
            if answers_equivalent(pair.question, regenerated, pair.answer,
                                  gateway, registry, trace=trace):
                survivors.append(pair.advanced("cycle_checked"))
            else:
                rejected.append(pair.rejected("cycle"))
        except BackendError as e:
            logger.warning("cyclic check failed for %r: %s", pair.question[:60], e)
            rejected.append(pair.rejected("backend"))
    return survivors, rejected


def filter_qa(passage: Passage, pairs: list[QAPair], gateway: LlmGateway,
              registry: TemplateRegistry, trace: Trace | None = None) -> list[QAPair]:
    survivors, _ = filter_qa_detailed(passage, pairs, gateway, registry, trace=trace)
    return survivors


def serialize_context(summary: StructSum) -> str:
    """Serialize a summary for question answering: markdown for tables
    (caption line first, blocks separated by blank lines), canonical JSON for
    mind maps."""
    if summary.kind == MIND_MAP:
        return mindmap_to_json_text(summary.root)
    blocks = []
    for table in summary.all_tables():
        md = table_to_markdown(table)
        blocks.append(f"Caption: {table.caption}\n{md}" if table.caption else md)
    return "\n\n".join(blocks)


def _answer_from_text(context: str, question: str, gateway: LlmGateway,
                      registry: TemplateRegistry, tag: str,
                      trace: Trace | None = None) -> str:
    prompt = registry.render("autoqa.answer", {"context": context, "question": question})
    resp = gateway.ask(tag, prompt)
    record_trace(trace, prompt, resp.samples)
    first_line = resp.samples[0].strip().splitlines()
    return first_line[0].strip() if first_line else ""


def answer_from_structsum(summary: StructSum, question: str, gateway: LlmGateway,
                          registry: TemplateRegistry, trace: Trace | None = None) -> str:
    """Answer a question from the serialized summary alone; one LLM call,
    trimmed first-line answer."""
    return _answer_from_text(serialize_context(summary), question, gateway, registry,
                             tag="autoqa.answer", trace=trace)


def answers_equivalent(question: str, answer_a: str, answer_b: str, gateway: LlmGateway,
                       registry: TemplateRegistry, trace: Trace | None = None) -> bool:
    """Conditional answer equivalence: exact case-insensitive matches
    short-circuit without an LLM call; otherwise one yes/no call."""
    if answer_a.strip().casefold() == answer_b.strip().casefold():
        return True
    prompt = registry.render("autoqa.equivalence", {
        "question": question, "answer_a": answer_a, "answer_b": answer_b,
    })
    resp = gateway.ask("autoqa.equivalence", prompt)
    record_trace(trace, prompt, resp.samples)
    return parse_yes_no(resp.samples[0], default=False, context="answer equivalence")


def coverage(summary: StructSum, passage: Passage, gateway: LlmGateway,
             registry: TemplateRegistry, count: int = DEFAULT_QA_COUNT,
             trace: Trace | None = None) -> CoverageResult:
    """Compute coverage of `summary` over questions generated from `passage`.

    A pair whose answering fails at the backend is dropped from the
    denominator with a warning rather than failing the computation.
    """
    pairs = filter_qa(passage, gen_qa(passage, gateway, registry, count=count, trace=trace),
                      gateway, registry, trace=trace)
    scored = 0
    equivalent = 0
    for pair in pairs:
        try:
            generated = answer_from_structsum(summary, pair.question, gateway, registry,
                                              trace=trace)
            if answers_equivalent(pair.question, generated, pair.answer, gateway, registry,
                                  trace=trace):
                equivalent += 1
            scored += 1
        except BackendError as e:
            logger.warning("dropping pair %r from coverage: %s", pair.question[:60], e)
    value = equivalent / scored if scored else None
    return CoverageResult(passage_id=passage.id, surviving_pairs=scored,
                          answered_equivalent=equivalent, value=value)


def coverage_curve(results, thresholds) -> list[tuple[float, float]]:
    """For each threshold, the percentage of defined coverage values at or
    above it. Undefined results are excluded from both numerator and
    denominator; an empty defined set yields an empty curve."""
    thresholds = list(thresholds)
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted ascending")
    values = [r.value if isinstance(r, CoverageResult) else r for r in results]
    defined = [v for v in values if v is not None]
    if not defined:
        return []
    return [(t, 100.0 * sum(1 for v in defined if v >= t) / len(defined)) for t in thresholds]


def evaluate_with_external_qa(summary: StructSum, triples, gateway: LlmGateway,
                              registry: TemplateRegistry,
                              trace: Trace | None = None) -> float:
    """Accuracy of the summary against externally supplied (question, answer)
    pairs, which bypass the generation filter entirely."""
    triples = list(triples)
    if not triples:
        raise ValueError("triples must be non-empty")
    hits = 0
    for question, gold in triples:
        generated = answer_from_structsum(summary, question, gateway, registry, trace=trace)
        if answers_equivalent(question, generated, gold, gateway, registry, trace=trace):
            hits += 1
    return hits / len(triples)
