"""Timed text-comprehension study: assignments, responses, grading, summary.

Each question is paired with three context combinations (structure only,
text only, structure plus text); every (question, combination) cell is
assigned to annotators so that no annotator sees the same question twice.
Responses carry client-measured timing and are persisted to an append-only
JSONL event log that is replayed at startup.
"""

from __future__ import annotations

import json
import math
import statistics
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .model import MIND_MAP, Passage, StructSum, mindmap_to_toc, table_to_markdown

STRUCTURE_ONLY = "structure_only"
TEXT_ONLY = "text_only"
STRUCTURE_PLUS_TEXT = "structure_plus_text"
COMBINATIONS = (STRUCTURE_ONLY, TEXT_ONLY, STRUCTURE_PLUS_TEXT)

GRADES = ("ungraded", "correct", "incorrect")


class AssignmentInfeasible(ValueError):
    """Too few annotators for the requested combinations × replication."""


class NotAssigned(KeyError):
    """The item is not assigned to this annotator."""


class AlreadyAnswered(ValueError):
    """The (annotator, item) cell already has a response."""


class ResponseNotFound(KeyError):
    """Grading refers to a response that does not exist."""


@dataclass(frozen=True)
class StudyQuestion:
    question_id: str
    question: str
    passage: Passage
    structsum: StructSum


@dataclass(frozen=True)
class StudyItem:
    item_id: str
    question_id: str
    question: str
    passage: Passage
    structsum: StructSum
    combination: str


@dataclass(frozen=True)
class Assignment:
    annotator_id: str
    item_ids: tuple[str, ...]


@dataclass(frozen=True)
class StudyResponse:
    """One annotator's timed answer to one item.

    Exactly one of answer_text / unanswerable is set; elapsed_ms is measured
    client-side from content reveal to submission.
    """

    annotator_id: str
    item_id: str
    answer_text: str | None
    unanswerable: bool
    elapsed_ms: int
    grade: str = "ungraded"

    def __post_init__(self) -> None:
        if self.unanswerable == (self.answer_text is not None):
            raise ValueError("exactly one of answer_text / unanswerable must be set")
        if self.elapsed_ms <= 0:
            raise ValueError("elapsed_ms must be positive")
        if self.grade not in GRADES:
            raise ValueError(f"unknown grade {self.grade!r}")


def item_id_for(question_id: str, combination: str) -> str:
    return f"{question_id}::{combination}"


def build_items(questions: Iterable[StudyQuestion],
                combinations: Sequence[str] = COMBINATIONS) -> list[StudyItem]:
    items = []
    for q in questions:
        for combination in combinations:
            items.append(StudyItem(
                item_id=item_id_for(q.question_id, combination),
                question_id=q.question_id,
                question=q.question,
                passage=q.passage,
                structsum=q.structsum,
                combination=combination,
            ))
    return items


def build_assignments(question_ids: Sequence[str], combinations: Sequence[str],
                      annotators: Sequence[str], replication: int = 1) -> list[Assignment]:
    """Assign every (question, combination) cell to `replication` distinct
    annotators, round-robin balanced, such that no annotator receives the
    same question twice."""
    n_annotators = len(annotators)
    needed = len(combinations) * replication
    if needed > n_annotators:
        raise AssignmentInfeasible(
            f"{needed} annotators needed per question, only {n_annotators} available")
    item_lists: dict[str, list[str]] = {a: [] for a in annotators}
    for qi, question_id in enumerate(question_ids):
        for ci, combination in enumerate(combinations):
            for r in range(replication):
                annotator = annotators[(qi + ci + r * len(combinations)) % n_annotators]
                item_lists[annotator].append(item_id_for(question_id, combination))
    return [Assignment(annotator_id=a, item_ids=tuple(ids)) for a, ids in item_lists.items()]


def reveal_payload(item: StudyItem) -> dict:
    """Context payload for one item's combination.

    Structure is rendered as plain markdown/outline text (no colors or graph
    layout) so presentation bias stays out of the timing comparison.
    """
    payload: dict = {"combination": item.combination, "text": None, "structure": None}
    if item.combination in (TEXT_ONLY, STRUCTURE_PLUS_TEXT):
        payload["text"] = item.passage.text
    if item.combination in (STRUCTURE_ONLY, STRUCTURE_PLUS_TEXT):
        payload["structure"] = render_structure(item.structsum)
    return payload


def render_structure(summary: StructSum) -> str:
    if summary.kind == MIND_MAP:
        return mindmap_to_toc(summary.root)
    blocks = []
    for table in summary.all_tables():
        md = table_to_markdown(table)
        blocks.append(f"{md}\n\nCaption: {table.caption}" if table.caption else md)
    return "\n\n".join(blocks)


class StudyStore:
    """In-memory study state backed by an append-only JSONL event log."""

    def __init__(self, items: Iterable[StudyItem], assignments: Iterable[Assignment],
                 log_path: str | Path | None = None) -> None:
        self._items = {item.item_id: item for item in items}
        self._assignments = {a.annotator_id: a for a in assignments}
        self._responses: dict[tuple[str, str], StudyResponse] = {}
        self._lock = threading.Lock()
        self._log_path = Path(log_path) if log_path else None
        if self._log_path and self._log_path.exists():
            self._replay_log()

    def _replay_log(self) -> None:
        for line in self._log_path.read_text("utf-8").splitlines():
            if not line.strip():
                continue
            event = json.loads(line)
            if event["event"] == "response":
                resp = StudyResponse(
                    annotator_id=event["annotator_id"], item_id=event["item_id"],
                    answer_text=event["answer_text"], unanswerable=event["unanswerable"],
                    elapsed_ms=event["elapsed_ms"], grade=event.get("grade", "ungraded"))
                self._responses[(resp.annotator_id, resp.item_id)] = resp
            elif event["event"] == "grade":
                key = (event["annotator_id"], event["item_id"])
                if key in self._responses:
                    self._responses[key] = replace(self._responses[key],
                                                   grade=event["verdict"])

    def _append_event(self, event: dict) -> None:
        if self._log_path is None:
            return
        with open(self._log_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(event, ensure_ascii=False) + "\n")
            f.flush()

    def item(self, item_id: str) -> StudyItem:
        return self._items[item_id]

    def items_by_id(self) -> Mapping[str, StudyItem]:
        return dict(self._items)

    def assignment(self, annotator_id: str) -> Assignment:
        try:
            return self._assignments[annotator_id]
        except KeyError:
            raise NotAssigned(f"unknown annotator {annotator_id!r}") from None

    def next_item(self, annotator_id: str) -> StudyItem | None:
        """The annotator's first assigned, not-yet-answered item."""
        assignment = self.assignment(annotator_id)
        with self._lock:
            for item_id in assignment.item_ids:
                if (annotator_id, item_id) not in self._responses:
                    return self._items[item_id]
        return None

    def reveal(self, annotator_id: str, item_id: str) -> dict:
        assignment = self.assignment(annotator_id)
        if item_id not in assignment.item_ids:
            raise NotAssigned(f"item {item_id!r} not assigned to {annotator_id!r}")
        return reveal_payload(self._items[item_id])

    def record_response(self, response: StudyResponse) -> None:
        """Persist one response; duplicates and unassigned cells are rejected."""
        assignment = self.assignment(response.annotator_id)
        if response.item_id not in assignment.item_ids:
            raise NotAssigned(
                f"item {response.item_id!r} not assigned to {response.annotator_id!r}")
        with self._lock:
            key = (response.annotator_id, response.item_id)
            if key in self._responses:
                raise AlreadyAnswered(f"{key} already answered")
            self._responses[key] = response
            self._append_event({
                "event": "response",
                "annotator_id": response.annotator_id,
                "item_id": response.item_id,
                "answer_text": response.answer_text,
                "unanswerable": response.unanswerable,
                "elapsed_ms": response.elapsed_ms,
                "grade": response.grade,
            })

    def grade_response(self, item_id: str, annotator_id: str, verdict: str) -> None:
        """Record a grade; regrades are allowed and audited in the event log."""
        if verdict not in ("correct", "incorrect"):
            raise ValueError(f"verdict must be correct/incorrect, got {verdict!r}")
        with self._lock:
            key = (annotator_id, item_id)
            if key not in self._responses:
                raise ResponseNotFound(f"no response for {key}")
            previous = self._responses[key].grade
            self._responses[key] = replace(self._responses[key], grade=verdict)
            self._append_event({
                "event": "grade",
                "annotator_id": annotator_id,
                "item_id": item_id,
                "verdict": verdict,
                "previous": previous,
            })

    def responses(self) -> list[StudyResponse]:
        with self._lock:
            return list(self._responses.values())

    def summarize(self) -> dict:
        combos = {item_id: item.combination for item_id, item in self._items.items()}
        return summarize(self.responses(), combos)


def summarize(responses: Iterable[StudyResponse],
              item_combinations: Mapping[str, str]) -> dict:
    """Per-combination timing and accuracy summary.

    Unanswerable responses are excluded from timing but counted in the
    unanswerable rate; the 95% CI uses the normal approximation
    mean +/- 1.96*s/sqrt(n). The relative time reduction of structure-only
    versus text-only is reported when both cells have timing data.
    """
    by_combo: dict[str, list[StudyResponse]] = {}
    for resp in responses:
        combo = item_combinations.get(resp.item_id)
        if combo is None:
            continue
        by_combo.setdefault(combo, []).append(resp)

    cells: dict[str, dict] = {}
    for combo, group in by_combo.items():
        answered = [r for r in group if not r.unanswerable]
        if not group:
            continue
        cell: dict = {
            "n_total": len(group),
            "n_unanswerable": len(group) - len(answered),
            "unanswerable_rate": (len(group) - len(answered)) / len(group),
        }
        if answered:
            times_s = [r.elapsed_ms / 1000.0 for r in answered]
            mean = statistics.fmean(times_s)
            spread = statistics.stdev(times_s) if len(times_s) > 1 else 0.0
            half_width = 1.96 * spread / math.sqrt(len(times_s))
            cell.update({
                "n": len(answered),
                "mean_time_s": mean,
                "ci95_low": mean - half_width,
                "ci95_high": mean + half_width,
            })
            graded = [r for r in answered if r.grade != "ungraded"]
            cell["n_graded"] = len(graded)
            cell["accuracy_after_grading"] = (
                sum(1 for r in graded if r.grade == "correct") / len(graded)
                if graded else None)
        cells[combo] = cell

    reduction = None
    structure = cells.get(STRUCTURE_ONLY, {})
    text = cells.get(TEXT_ONLY, {})
    if structure.get("mean_time_s") and text.get("mean_time_s"):
        reduction = 1.0 - structure["mean_time_s"] / text["mean_time_s"]
    return {
        "combinations": cells,
        "time_reduction_structure_vs_text": reduction,
    }
