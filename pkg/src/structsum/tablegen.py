"""Divide-and-generate table pipeline.

A passage is first segmented into sub-topic chunks via a one-shot prompt,
then one table+caption is generated per chunk with a zero-shot prompt.
Single-table and query-focused modes reuse the same generation step over the
whole passage.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, replace

from .llm import LlmGateway, Trace, record_trace
from .model import Passage, StructSum, Table
from .prompts import TemplateRegistry

logger = logging.getLogger(__name__)

SEGMENT_DELIMITER = "---"

_SEPARATOR_CELL_RE = re.compile(r"^:?-+:?$")
_CAPTION_RE = re.compile(r"^\s*caption:\s*(.*)$", re.IGNORECASE)
_UNESCAPED_PIPE_RE = re.compile(r"(?<!\\)\|")


class TableParseError(ValueError):
    """No parsable table in the model response; carries the raw text."""

    def __init__(self, raw: str, message: str = "no markdown table found") -> None:
        super().__init__(message)
        self.raw = raw


class MultiTableEmpty(RuntimeError):
    """Every chunk of a passage failed table generation."""


@dataclass(frozen=True)
class Chunk:
    parent_passage_id: str
    ordinal: int
    text: str


def _match_contiguous(source: str, candidate: str) -> str | None:
    """Locate `candidate` as a contiguous, whitespace-tolerant substring of
    `source` and return the matched source text, or None."""
    tokens = candidate.split()
    if not tokens:
        return None
    pattern = r"\s+".join(re.escape(t) for t in tokens)
    m = re.search(pattern, source)
    return m.group() if m else None


def segment_passage(passage: Passage, gateway: LlmGateway, registry: TemplateRegistry,
                    trace: Trace | None = None) -> list[Chunk]:
    """Ask the model to partition the passage into sub-topic chunks.

    The model is asked to echo sub-passages verbatim; each returned chunk is
    matched back to a contiguous substring of the passage and unmatched
    chunks are dropped. If everything is dropped, the whole passage becomes a
    single chunk.
    """
    prompt = registry.render("table.segment", {"passage": passage.text})
    resp = gateway.ask("table.segment", prompt)
    record_trace(trace, prompt, resp.samples)
    parts = [p.strip() for p in _split_segments(resp.samples[0]) if p.strip()]
    chunks: list[Chunk] = []
    for part in parts:
        matched = _match_contiguous(passage.text, part)
        if matched is None:
            logger.warning("dropping chunk not found in passage %s: %r", passage.id, part[:60])
            continue
        chunks.append(Chunk(passage.id, len(chunks), matched))
    if not chunks:
        return [Chunk(passage.id, 0, passage.text)]
    return chunks


def _split_segments(text: str) -> list[str]:
    segments: list[list[str]] = [[]]
    for line in text.splitlines():
        if line.strip() == SEGMENT_DELIMITER:
            segments.append([])
        else:
            segments[-1].append(line)
    return ["\n".join(seg) for seg in segments]


def _split_cells(line: str) -> list[str]:
    parts = _UNESCAPED_PIPE_RE.split(line)
    # Leading/trailing pipes leave empty boundary fragments.
    if parts and parts[0].strip() == "":
        parts = parts[1:]
    if parts and parts[-1].strip() == "":
        parts = parts[:-1]
    return [p.strip().replace("\\|", "|") for p in parts]


def _is_separator_line(line: str) -> bool:
    if "|" not in line and "-" not in line:
        return False
    cells = _UNESCAPED_PIPE_RE.split(line)
    cells = [c.strip() for c in cells if c.strip()]
    return bool(cells) and all(_SEPARATOR_CELL_RE.match(c) for c in cells)


def parse_markdown_table(text: str) -> Table:
    """Parse the first pipe-table block in `text`.

    The block is a header line, a separator line of dashes, and zero or more
    row lines. Cells are trimmed and "\\|" unescaped. Ragged rows parse
    successfully; well-formedness is the global critic's concern.
    """
    lines = text.splitlines()
    for i in range(len(lines) - 1):
        if "|" not in lines[i]:
            continue
        if not _is_separator_line(lines[i + 1]):
            continue
        header = _split_cells(lines[i])
        if not header:
            continue
        rows = []
        # Only the line after the header is a delimiter; later dash-only
        # lines are data rows.
        for line in lines[i + 2:]:
            if "|" not in line:
                break
            cells = _split_cells(line)
            if not cells:
                break
            rows.append(tuple(cells))
        return Table(header=tuple(header), rows=tuple(rows))
    raise TableParseError(text)


def _extract_caption(text: str) -> str:
    for line in text.splitlines():
        m = _CAPTION_RE.match(line)
        if m:
            return m.group(1).strip()
    return ""


def generate_table(chunk_text: str, gateway: LlmGateway, registry: TemplateRegistry,
                   query: str | None = None, trace: Trace | None = None) -> tuple[Table, str]:
    """Generate one table+caption for a chunk of text.

    The caption is read from a "Caption:" line before or after the table and
    may be absent. Raises TableParseError when the response has no table; the
    caller may retry once.
    """
    query_block = f"Focus on information relevant to this query: {query}\n" if query else ""
    prompt = registry.render("table.generate", {"chunk": chunk_text, "query_block": query_block})
    resp = gateway.ask("table.generate", prompt)
    record_trace(trace, prompt, resp.samples)
    raw = resp.samples[0]
    table = parse_markdown_table(raw)
    caption = _extract_caption(raw)
    if caption:
        table = replace(table, caption=caption)
    return table, raw


def divide_and_generate(passage: Passage, gateway: LlmGateway, registry: TemplateRegistry,
                        query: str | None = None, trace: Trace | None = None,
                        chunks_out: list[Chunk] | None = None) -> StructSum:
    """Segment the passage and generate one table per chunk, in chunk order.

    A chunk whose generation fails twice (one retry) is skipped; if no chunk
    yields a table, MultiTableEmpty is raised.
    """
    chunks = segment_passage(passage, gateway, registry, trace=trace)
    if chunks_out is not None:
        chunks_out.extend(chunks)
    tables: list[Table] = []
    for chunk in chunks:
        table = None
        for attempt in range(2):
            try:
                table, _ = generate_table(chunk.text, gateway, registry, query=query, trace=trace)
                break
            except TableParseError:
                if attempt == 0:
                    logger.warning("retrying table generation for chunk %s#%d",
                                   chunk.parent_passage_id, chunk.ordinal)
        if table is None:
            logger.warning("skipping chunk %s#%d after failed retry",
                           chunk.parent_passage_id, chunk.ordinal)
            continue
        tables.append(table)
    if not tables:
        raise MultiTableEmpty(f"no table generated for passage {passage.id}")
    return StructSum.multi_table(tables, passage.id)


def generate_single_table(passage: Passage, gateway: LlmGateway, registry: TemplateRegistry,
                          query: str | None = None, trace: Trace | None = None) -> StructSum:
    """Generate one table over the whole passage (optionally query-focused)."""
    table, _ = generate_table(passage.text, gateway, registry, query=query, trace=trace)
    return StructSum.single_table(table, passage.id)
