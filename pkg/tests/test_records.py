from __future__ import annotations

import json

import pytest

from structsum.critics import Verdict
from structsum.model import MindMapNode, StructSum, Table
from structsum.records import (
    GenerationRecord,
    read_records_jsonl,
    record_from_json_dict,
    record_to_json_dict,
    write_records_jsonl,
)


def _record() -> GenerationRecord:
    table = Table(header=("a", "b"), rows=(("1", "2"),), caption="cap")
    return GenerationRecord(
        passage_id="p1",
        structsum=StructSum.multi_table([table], "p1"),
        verdicts=(Verdict.make("factuality", "table", {"failures": []}),),
        coverage=0.75,
        prompt_trace=(("prompt text", "response text"),),
    )


def test_wire_schema_field_names():
    d = record_to_json_dict(_record())
    assert list(d) == ["passage_id", "structsum", "verdicts", "coverage", "prompt_trace"]
    assert d["structsum"]["kind"] == "multi_table"


def test_kind_tags():
    table = Table(header=("a",))
    tree = MindMapNode("r")
    assert StructSum.single_table(table, "p").to_json_dict()["kind"] == "single_table"
    assert StructSum.multi_table([table], "p").to_json_dict()["kind"] == "multi_table"
    assert StructSum.mind_map(tree, "p").to_json_dict()["kind"] == "mind_map"


def test_round_trip_through_json():
    record = _record()
    assert record_from_json_dict(record_to_json_dict(record)) == record


def test_undefined_coverage_is_null():
    record = GenerationRecord(passage_id="p", structsum=StructSum.mind_map(MindMapNode("r"), "p"))
    d = record_to_json_dict(record)
    assert d["coverage"] is None
    assert json.loads(json.dumps(d))["coverage"] is None


def test_coverage_range_validated():
    with pytest.raises(ValueError):
        GenerationRecord(passage_id="p",
                         structsum=StructSum.mind_map(MindMapNode("r"), "p"),
                         coverage=1.5)


def test_jsonl_file_round_trip(tmp_path):
    records = [_record(), _record().with_coverage(None)]
    path = tmp_path / "records.jsonl"
    assert write_records_jsonl(path, records) == 2
    assert read_records_jsonl(path) == records
