"""Pipeline wiring: ingestion, generation, critique, coverage, and stats.

Stages read and write JSONL files so each stage's output is a valid input to
the next. A run writes a manifest recording the config hash, per-stage in/out
counts, and per-tag LLM call totals; with a fixed replay script the whole run
is byte-for-byte deterministic.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

from . import autoqa, critics, mindmapgen, tablegen
from .llm import CallLedger, LlmGateway, ReplayBackend, RemoteBackend, load_replay_script
from .model import Passage, StructSum
from .prompts import TemplateRegistry
from .records import (
    GenerationRecord,
    read_records_jsonl,
    record_to_json_dict,
    write_records_jsonl,
)
from .stats import corpus_stats
from .textproc import CorpusDocument, make_passage, passes_table_filter, split_paragraphs

logger = logging.getLogger(__name__)

STAGES = ("ingest", "generate", "critique", "coverage", "stats")


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage


@dataclass
class RunConfig:
    backend: str = "replay"  # replay | remote
    replay_script: Path | None = None
    remote_url: str = ""
    auth_token: str = ""
    model_name: str = ""
    templates_dir: Path | None = None
    temperatures: dict[str, float] = field(default_factory=dict)

    modality: str = "mindmap"  # mindmap | tables
    table_mode: str = "multi"  # multi | single
    query: str | None = None
    max_steps: int = 5
    expand_samples: int = 4
    qa_count: int = 10
    thresholds: tuple[float, ...] = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    table_filter: bool = False
    corpus_format: str = "jsonl"  # jsonl | text
    seed: int = 0
    workers: int = 1

    stages: tuple[str, ...] = STAGES
    input_path: Path | None = None
    out_dir: Path = Path(".")

    # Derived file names inside out_dir; overridable for single-stage use.
    passages_path: Path | None = None
    records_path: Path | None = None
    chunks_path: Path | None = None
    verdicts_path: Path | None = None
    filtered_path: Path | None = None
    covered_path: Path | None = None
    curve_path: Path | None = None
    stats_path: Path | None = None
    manifest_path: Path | None = None

    def resolved(self) -> "RunConfig":
        out = Path(self.out_dir)
        defaults = {
            "passages_path": out / "passages.jsonl",
            "records_path": out / "records.jsonl",
            "chunks_path": out / "chunks.jsonl",
            "verdicts_path": out / "verdicts.jsonl",
            "filtered_path": out / "filtered.jsonl",
            "covered_path": out / "covered.jsonl",
            "curve_path": out / "curve.csv",
            "stats_path": out / "stats.json",
            "manifest_path": out / "manifest.json",
        }
        updates = {k: v for k, v in defaults.items() if getattr(self, k) is None}
        return replace(self, **updates) if updates else self

    def config_hash(self) -> str:
        payload = {k: str(v) for k, v in sorted(self.__dict__.items())}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).hexdigest()


def build_gateway(config: RunConfig) -> LlmGateway:
    if config.backend == "replay":
        script = load_replay_script(config.replay_script) if config.replay_script else []
        backend = ReplayBackend(script)
    elif config.backend == "remote":
        if not config.remote_url:
            raise ValueError("remote backend requires remote_url")
        backend = RemoteBackend(config.remote_url, auth_token=config.auth_token or None,
                                model=config.model_name or None)
    else:
        raise ValueError(f"unknown backend {config.backend!r}")
    return LlmGateway(backend, CallLedger(), temperatures=config.temperatures)


# --- passage files -----------------------------------------------------------


def write_passages_jsonl(path: Path, passages: Iterable[Passage]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for p in passages:
            f.write(json.dumps({"id": p.id, "text": p.text}, ensure_ascii=False) + "\n")
            count += 1
    return count


def read_passages_jsonl(path: Path) -> list[Passage]:
    passages = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            obj = json.loads(line)
            passages.append(make_passage(obj["id"], obj["text"]))
    return passages


def load_corpus(path: Path, corpus_format: str) -> list[CorpusDocument]:
    if corpus_format == "jsonl":
        docs = []
        for line in Path(path).read_text("utf-8").splitlines():
            if line.strip():
                obj = json.loads(line)
                docs.append(CorpusDocument(doc_id=obj["doc_id"], raw_text=obj["raw_text"]))
        return docs
    if corpus_format == "text":
        path = Path(path)
        files = sorted(path.glob("*.txt")) if path.is_dir() else [path]
        return [CorpusDocument(doc_id=f.stem, raw_text=f.read_text("utf-8")) for f in files]
    raise ValueError(f"unknown corpus format {corpus_format!r}")


# --- stages ------------------------------------------------------------------


def stage_ingest(config: RunConfig) -> dict[str, int]:
    docs = load_corpus(config.input_path, config.corpus_format)
    passages = [p for doc in docs for p in split_paragraphs(doc)]
    total = len(passages)
    if config.table_filter:
        passages = [p for p in passages if passes_table_filter(p)]
    write_passages_jsonl(config.passages_path, passages)
    return {"in": total, "out": len(passages)}


def _map_passages(passages: list[Passage], fn: Callable[[Passage], GenerationRecord | None],
                  workers: int) -> list[GenerationRecord]:
    """Apply fn over passages with per-instance fault isolation, preserving
    input order in the output."""

    def safe(p: Passage) -> GenerationRecord | None:
        try:
            return fn(p)
        except Exception:
            logger.exception("skipping passage %s", p.id)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(safe, passages))
    else:
        results = [safe(p) for p in passages]
    return [r for r in results if r is not None]


def stage_generate(config: RunConfig, gateway: LlmGateway,
                   registry: TemplateRegistry) -> dict[str, int]:
    passages = read_passages_jsonl(config.passages_path)
    workers = 1 if config.backend == "replay" else config.workers
    chunk_map: dict[str, list[str]] = {}

    def generate(p: Passage) -> GenerationRecord:
        trace: list[tuple[str, str]] = []
        if config.modality == "mindmap":
            root, _state = mindmapgen.iterative_generate(
                p, gateway, registry, max_steps=config.max_steps,
                sample_count=config.expand_samples, trace=trace)
            summary = StructSum.mind_map(root, p.id)
        elif config.table_mode == "single":
            summary = tablegen.generate_single_table(p, gateway, registry,
                                                     query=config.query, trace=trace)
        else:
            chunks_out: list[tablegen.Chunk] = []
            summary = tablegen.divide_and_generate(p, gateway, registry, query=config.query,
                                                   trace=trace, chunks_out=chunks_out)
            chunk_map[p.id] = [c.text for c in chunks_out]
        return GenerationRecord(passage_id=p.id, structsum=summary,
                                prompt_trace=tuple(trace))

    records = _map_passages(passages, generate, workers)
    write_records_jsonl(config.records_path, records)
    if config.modality == "tables" and config.table_mode == "multi":
        with open(config.chunks_path, "w", encoding="utf-8") as f:
            for pid in sorted(chunk_map):
                f.write(json.dumps({"passage_id": pid, "chunks": chunk_map[pid]},
                                   ensure_ascii=False) + "\n")
    return {"in": len(passages), "out": len(records)}


def stage_critique(config: RunConfig, gateway: LlmGateway,
                   registry: TemplateRegistry) -> dict[str, int]:
    records = read_records_jsonl(config.records_path)
    passages = {p.id: p for p in read_passages_jsonl(config.passages_path)}
    judged: list[GenerationRecord] = []
    for record in records:
        passage = passages.get(record.passage_id)
        if passage is None:
            logger.warning("no passage %s for critics; skipping record", record.passage_id)
            continue
        try:
            verdicts = critics.critique_structsum(passage, record.structsum, gateway, registry)
        except Exception:
            logger.exception("critics failed for %s; skipping record", record.passage_id)
            continue
        judged.append(record.with_verdicts(verdicts))

    with open(config.verdicts_path, "w", encoding="utf-8") as f:
        for record in judged:
            f.write(json.dumps({
                "passage_id": record.passage_id,
                "verdicts": [v.to_json_dict() for v in record.verdicts],
                "passed": critics.combine(list(record.verdicts)),
            }, ensure_ascii=False) + "\n")

    surviving = [r for r in judged if critics.combine(list(r.verdicts))]
    write_records_jsonl(config.filtered_path, surviving)
    for critic in critics.ALL_CRITICS:
        passed = sum(1 for r in judged for v in r.verdicts if v.critic == critic and v.passed)
        print(f"critic {critic}: {passed}/{len(judged)} passed")
    return {"in": len(records), "out": len(surviving)}


def stage_coverage(config: RunConfig, gateway: LlmGateway,
                   registry: TemplateRegistry) -> dict[str, int]:
    records = read_records_jsonl(config.filtered_path)
    passages = {p.id: p for p in read_passages_jsonl(config.passages_path)}
    covered: list[GenerationRecord] = []
    results = []
    for record in records:
        passage = passages.get(record.passage_id)
        if passage is None:
            logger.warning("no passage %s for coverage; keeping record unscored",
                           record.passage_id)
            covered.append(record)
            continue
        result = autoqa.coverage(record.structsum, passage, gateway, registry,
                                 count=config.qa_count)
        results.append(result)
        covered.append(record.with_coverage(result.value))
    write_records_jsonl(config.covered_path, covered)
    curve = autoqa.coverage_curve(results, config.thresholds)
    with open(config.curve_path, "w", encoding="utf-8") as f:
        f.write("threshold,percent\n")
        for threshold, percent in curve:
            f.write(f"{threshold},{percent}\n")
    return {"in": len(records), "out": len(covered)}


def stage_stats(config: RunConfig) -> dict[str, int]:
    source = config.covered_path if Path(config.covered_path).exists() else config.records_path
    records = read_records_jsonl(source)
    passages = {}
    if Path(config.passages_path).exists():
        passages = {p.id: p for p in read_passages_jsonl(config.passages_path)}
    chunks = {}
    if Path(config.chunks_path).exists():
        for line in Path(config.chunks_path).read_text("utf-8").splitlines():
            if line.strip():
                obj = json.loads(line)
                chunks[obj["passage_id"]] = list(obj["chunks"])
    report = corpus_stats(records, passages=passages, chunks=chunks)
    Path(config.stats_path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return {"in": len(records), "out": len(records)}


def run(config: RunConfig) -> dict:
    """Execute the configured stages in order and write the run manifest.

    Per-instance failures are skipped and logged inside stages; a stage-level
    failure aborts the run with a StageError naming the stage.
    """
    config = config.resolved()
    Path(config.out_dir).mkdir(parents=True, exist_ok=True)
    needs_backend = {"generate", "critique", "coverage"} & set(config.stages)
    gateway = build_gateway(config) if needs_backend else None
    registry = TemplateRegistry.load(config.templates_dir) if needs_backend else None

    stage_fns: dict[str, Callable[[], dict[str, int]]] = {
        "ingest": lambda: stage_ingest(config),
        "generate": lambda: stage_generate(config, gateway, registry),
        "critique": lambda: stage_critique(config, gateway, registry),
        "coverage": lambda: stage_coverage(config, gateway, registry),
        "stats": lambda: stage_stats(config),
    }
    manifest: dict = {
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "stages": {},
    }
    for stage in config.stages:
        if stage not in stage_fns:
            raise ValueError(f"unknown stage {stage!r}")
        try:
            manifest["stages"][stage] = stage_fns[stage]()
        except Exception as e:
            raise StageError(stage, e) from e
    manifest["ledger"] = gateway.ledger.snapshot() if gateway else {}
    Path(config.manifest_path).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
