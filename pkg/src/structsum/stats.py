"""Corpus-level statistics over generation records."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Iterable, Mapping

from .model import MIND_MAP, Passage, mindmap_depth, mindmap_node_count
from .records import GenerationRecord
from .textproc import split_sentences


@dataclass(frozen=True)
class TableStats:
    avg_words_per_chunk: float = 0.0
    avg_sentences_per_chunk: float = 0.0
    avg_words_per_input: float = 0.0
    avg_sentences_per_input: float = 0.0
    avg_rows: float = 0.0
    avg_cols: float = 0.0
    avg_tables: float = 0.0
    max_tables: int = 0
    record_count: int = 0


@dataclass(frozen=True)
class MindMapStats:
    avg_words: float = 0.0
    avg_sentences: float = 0.0
    avg_nodes: float = 0.0
    avg_depth: float = 0.0
    record_count: int = 0


@dataclass(frozen=True)
class StatsReport:
    tables: TableStats
    mindmaps: MindMapStats

    def to_dict(self) -> dict:
        return {"tables": asdict(self.tables), "mindmaps": asdict(self.mindmaps)}


def _mean(values: list[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _word_count(text: str) -> int:
    return len(text.split())


def corpus_stats(records: Iterable[GenerationRecord],
                 passages: Mapping[str, Passage] | None = None,
                 chunks: Mapping[str, list[str]] | None = None) -> StatsReport:
    """Aggregate averages over a record corpus.

    Word counts use whitespace tokenization; sentence counts use the
    rule-based splitter. Mind map depth counts edges on the longest
    root-to-leaf path (a single node has depth 0) and node counts include the
    root. Input-text and chunk statistics cover the records whose passage or
    chunk texts are provided in the optional lookups. An empty record list
    yields an all-zero report with zero record counts.
    """
    records = list(records)
    passages = passages or {}
    chunks = chunks or {}

    table_records = [r for r in records if r.structsum.kind != MIND_MAP]
    mindmap_records = [r for r in records if r.structsum.kind == MIND_MAP]

    all_tables = [t for r in table_records for t in r.structsum.all_tables()]
    table_inputs = [passages[r.passage_id] for r in table_records if r.passage_id in passages]
    chunk_texts = [c for r in table_records for c in chunks.get(r.passage_id, [])]

    tables = TableStats(
        avg_words_per_chunk=_mean([_word_count(c) for c in chunk_texts]),
        avg_sentences_per_chunk=_mean([len(split_sentences(c)) for c in chunk_texts]),
        avg_words_per_input=_mean([_word_count(p.text) for p in table_inputs]),
        avg_sentences_per_input=_mean([float(len(p.sentences)) for p in table_inputs]),
        avg_rows=_mean([float(len(t.rows)) for t in all_tables]),
        avg_cols=_mean([float(len(t.header)) for t in all_tables]),
        avg_tables=_mean([float(len(r.structsum.all_tables())) for r in table_records]),
        max_tables=max((len(r.structsum.all_tables()) for r in table_records), default=0),
        record_count=len(table_records),
    )

    mindmap_inputs = [passages[r.passage_id] for r in mindmap_records if r.passage_id in passages]
    roots = [r.structsum.root for r in mindmap_records]
    mindmaps = MindMapStats(
        avg_words=_mean([_word_count(p.text) for p in mindmap_inputs]),
        avg_sentences=_mean([float(len(p.sentences)) for p in mindmap_inputs]),
        avg_nodes=_mean([float(mindmap_node_count(root)) for root in roots]),
        avg_depth=_mean([float(mindmap_depth(root)) for root in roots]),
        record_count=len(mindmap_records),
    )
    return StatsReport(tables=tables, mindmaps=mindmaps)
