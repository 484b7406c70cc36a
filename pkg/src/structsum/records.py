"""Generation records and their JSONL wire format.

One JSON object per line with exactly the fields passage_id, structsum,
verdicts, coverage, and prompt_trace. Coverage is a fraction or null when
undefined/not yet computed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable

from .critics import Verdict
from .model import StructSum


@dataclass(frozen=True)
class GenerationRecord:
    passage_id: str
    structsum: StructSum
    verdicts: tuple[Verdict, ...] = ()
    coverage: float | None = None
    prompt_trace: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "verdicts", tuple(self.verdicts))
        object.__setattr__(self, "prompt_trace",
                           tuple((p, r) for p, r in self.prompt_trace))
        if self.coverage is not None and not 0.0 <= self.coverage <= 1.0:
            raise ValueError("coverage must lie in [0, 1] when defined")

    def with_verdicts(self, verdicts: Iterable[Verdict]) -> GenerationRecord:
        return replace(self, verdicts=tuple(verdicts))

    def with_coverage(self, coverage: float | None) -> GenerationRecord:
        return replace(self, coverage=coverage)


def record_to_json_dict(record: GenerationRecord) -> dict:
    return {
        "passage_id": record.passage_id,
        "structsum": record.structsum.to_json_dict(),
        "verdicts": [v.to_json_dict() for v in record.verdicts],
        "coverage": record.coverage,
        "prompt_trace": [[p, r] for p, r in record.prompt_trace],
    }


def record_from_json_dict(d: dict) -> GenerationRecord:
    return GenerationRecord(
        passage_id=d["passage_id"],
        structsum=StructSum.from_json_dict(d["structsum"], d["passage_id"]),
        verdicts=tuple(Verdict.from_json_dict(v) for v in d["verdicts"]),
        coverage=d["coverage"],
        prompt_trace=tuple((p, r) for p, r in d["prompt_trace"]),
    )


def write_records_jsonl(path: str | Path, records: Iterable[GenerationRecord]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record_to_json_dict(record), ensure_ascii=False) + "\n")
            count += 1
    return count


def read_records_jsonl(path: str | Path) -> list[GenerationRecord]:
    records = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            records.append(record_from_json_dict(json.loads(line)))
    return records
