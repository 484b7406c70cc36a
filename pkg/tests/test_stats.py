from __future__ import annotations

import random

from structsum.model import MindMapNode, StructSum, Table
from structsum.records import GenerationRecord
from structsum.stats import corpus_stats
from structsum.textproc import make_passage, split_sentences

from conftest import random_table, random_tree


def _table_record(pid: str, tables) -> GenerationRecord:
    summary = (StructSum.single_table(tables[0], pid) if len(tables) == 1
               else StructSum.multi_table(tables, pid))
    return GenerationRecord(passage_id=pid, structsum=summary)


def _mindmap_record(pid: str, root) -> GenerationRecord:
    return GenerationRecord(passage_id=pid, structsum=StructSum.mind_map(root, pid))


def test_single_table_fixture_exact():
    table = Table(header=("a", "b", "c"),
                  rows=tuple((f"x{i}", f"y{i}", f"z{i}") for i in range(7)))
    report = corpus_stats([_table_record("p", [table])])
    assert report.tables.avg_rows == 7
    assert report.tables.avg_cols == 3
    assert report.tables.avg_tables == 1
    assert report.tables.max_tables == 1
    assert report.tables.record_count == 1


def test_empty_corpus_all_zero():
    report = corpus_stats([])
    assert report.tables.record_count == 0
    assert report.mindmaps.record_count == 0
    assert report.tables.avg_rows == 0.0
    assert report.mindmaps.avg_nodes == 0.0


def test_depth_conventions():
    single = corpus_stats([_mindmap_record("p", MindMapNode("only"))])
    assert single.mindmaps.avg_depth == 0.0
    assert single.mindmaps.avg_nodes == 1.0


def test_permutation_invariance():
    rng = random.Random(2)
    records = []
    for i in range(8):
        if i % 2:
            records.append(_mindmap_record(f"p{i}", random_tree(rng)))
        else:
            tables = [random_table(rng) for _ in range(rng.randrange(1, 4))]
            records.append(_table_record(f"p{i}", tables))
    shuffled = records[:]
    rng.shuffle(shuffled)
    assert corpus_stats(records) == corpus_stats(shuffled)


def test_synthetic_corpus_matches_independent_recomputation():
    rng = random.Random(31)
    passages = {}
    chunks = {}
    records = []
    for i in range(10):
        pid = f"p{i}"
        text = " ".join(f"Sentence number {j} has value {rng.randrange(100)}."
                        for j in range(rng.randrange(2, 6)))
        passages[pid] = make_passage(pid, text)
        if i < 6:
            tables = [random_table(rng) for _ in range(rng.randrange(1, 4))]
            records.append(_table_record(pid, tables))
            chunks[pid] = [text[: len(text) // 2], text[len(text) // 2:]]
        else:
            records.append(_mindmap_record(pid, random_tree(rng)))

    report = corpus_stats(records, passages=passages, chunks=chunks)

    # Independent spreadsheet-style recomputation.
    table_records = [r for r in records if r.structsum.kind != "mind_map"]
    mindmap_records = [r for r in records if r.structsum.kind == "mind_map"]
    tables = [t for r in table_records for t in r.structsum.all_tables()]
    rows = [len(t.rows) for t in tables]
    cols = [len(t.header) for t in tables]
    counts = [len(r.structsum.all_tables()) for r in table_records]
    chunk_texts = [c for r in table_records for c in chunks[r.passage_id]]
    chunk_words = [len(c.split()) for c in chunk_texts]
    input_words = [len(passages[r.passage_id].text.split()) for r in table_records]
    input_sents = [len(passages[r.passage_id].sentences) for r in table_records]

    assert abs(report.tables.avg_rows - sum(rows) / len(rows)) < 1e-9
    assert abs(report.tables.avg_cols - sum(cols) / len(cols)) < 1e-9
    assert abs(report.tables.avg_tables - sum(counts) / len(counts)) < 1e-9
    assert report.tables.max_tables == max(counts)
    assert abs(report.tables.avg_words_per_chunk
               - sum(chunk_words) / len(chunk_words)) < 1e-9
    assert abs(report.tables.avg_sentences_per_chunk
               - sum(len(split_sentences(c)) for c in chunk_texts) / len(chunk_texts)) < 1e-9
    assert abs(report.tables.avg_words_per_input
               - sum(input_words) / len(input_words)) < 1e-9
    assert abs(report.tables.avg_sentences_per_input
               - sum(input_sents) / len(input_sents)) < 1e-9

    def depth(node):
        return 0 if not node.children else 1 + max(depth(c) for c in node.children)

    def nodes(node):
        return 1 + sum(nodes(c) for c in node.children)

    roots = [r.structsum.root for r in mindmap_records]
    mm_words = [len(passages[r.passage_id].text.split()) for r in mindmap_records]
    assert abs(report.mindmaps.avg_nodes - sum(map(nodes, roots)) / len(roots)) < 1e-9
    assert abs(report.mindmaps.avg_depth - sum(map(depth, roots)) / len(roots)) < 1e-9
    assert abs(report.mindmaps.avg_words - sum(mm_words) / len(mm_words)) < 1e-9
    assert report.mindmaps.record_count == len(mindmap_records)


def test_max_tables_at_least_avg():
    rng = random.Random(4)
    records = [_table_record(f"p{i}", [random_table(rng)
                                       for _ in range(rng.randrange(1, 5))])
               for i in range(6)]
    report = corpus_stats(records)
    assert report.tables.max_tables >= report.tables.avg_tables


def test_report_serializes():
    report = corpus_stats([])
    d = report.to_dict()
    assert set(d) == {"tables", "mindmaps"}
    assert "avg_rows" in d["tables"] and "avg_depth" in d["mindmaps"]
