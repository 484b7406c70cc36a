"""Corpus ingestion, rule-based sentence segmentation, and input filters."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .model import Passage

PARAGRAPH_MARKER = "_START_PARAGRAPH_"
NEWLINE_MARKER = "_NEWLINE_"

# Digit-bearing token: alnum runs joined by internal , . : / - separators,
# e.g. "4,050", "6.1", "km/h", "8-inch". Only tokens containing a digit count.
_TOKEN_RE = re.compile(r"[0-9A-Za-z]+(?:[,.:/\-][0-9A-Za-z]+)*")

# Candidate sentence boundary: run of final punctuation followed by
# whitespace and an uppercase letter, optionally behind an opening
# quote/bracket.
_PUNCT_RE = re.compile(r"[.!?]+")
_AFTER_RE = re.compile(r"\s+[\"'“‘(\[]?[A-Z]")


@dataclass(frozen=True)
class CorpusDocument:
    doc_id: str
    raw_text: str

    def __post_init__(self) -> None:
        if not self.raw_text:
            raise ValueError("corpus document text must be non-empty")


def default_abbreviations() -> frozenset[str]:
    """Abbreviation allowlist shipped as package data, one token per line."""
    text = resources.files(__package__).joinpath("data/abbreviations.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def split_sentences(text: str, abbreviations: frozenset[str] | None = None) -> list[str]:
    """Split text into sentences with deterministic rule-based segmentation.

    A boundary is a run of sentence-final punctuation (. ! ?) followed by
    whitespace and an uppercase (possibly quoted/bracketed) character, unless
    the token ending in "." is on the abbreviation allowlist. Sentences are
    contiguous slices of the input, stripped of surrounding whitespace.
    """
    if abbreviations is None:
        abbreviations = default_abbreviations()
    if not text.strip():
        return []
    boundaries: list[int] = []
    for m in _PUNCT_RE.finditer(text):
        end = m.end()
        if not _AFTER_RE.match(text, end):
            continue
        if m.group().endswith("."):
            tok = re.search(r"\S+$", text[:end])
            if tok and tok.group() in abbreviations:
                continue
        boundaries.append(end)
    sentences: list[str] = []
    start = 0
    for b in boundaries:
        seg = text[start:b].strip()
        if seg:
            sentences.append(seg)
        start = b
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def make_passage(passage_id: str, text: str,
                 abbreviations: frozenset[str] | None = None) -> Passage:
    return Passage(id=passage_id, text=text,
                   sentences=tuple(split_sentences(text, abbreviations)))


def split_paragraphs(doc: CorpusDocument) -> list[Passage]:
    """Split a corpus document into one passage per paragraph marker segment.

    Segments are delimited by the literal paragraph marker; embedded newline
    markers are replaced with real newlines. Blank segments are dropped. A
    document without markers yields a single passage covering the whole text.
    Passage ids are "<doc_id>#<ordinal>".
    """
    text = doc.raw_text.replace(NEWLINE_MARKER, "\n")
    passages: list[Passage] = []
    for segment in text.split(PARAGRAPH_MARKER):
        if not segment.strip():
            continue
        passages.append(make_passage(f"{doc.doc_id}#{len(passages)}", segment.strip()))
    return passages


def count_numeric_tokens(text: str) -> int:
    """Count maximal digit-bearing tokens ("4,050 long tons (4,110 t)" has 2)."""
    return sum(1 for m in _TOKEN_RE.finditer(text) if any(c.isdigit() for c in m.group()))


def passes_table_filter(passage: Passage) -> bool:
    """True iff the passage has more than 20 numeric tokens and at least 3 sentences."""
    return count_numeric_tokens(passage.text) > 20 and len(passage.sentences) >= 3
