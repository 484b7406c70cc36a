"""Command-line entry point.

Subcommands: ingest, generate (tables|mindmaps), critique,
evaluate (coverage|external-qa), stats, study serve. Backend and template
options can come from flags, a flat key=value config file, or the
environment (BACKEND, REPLAY_SCRIPT, REMOTE_URL, AUTH_TOKEN, MODEL_NAME).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import autoqa, pipeline, tablegen
from .model import QAPair, StructSum
from .pipeline import RunConfig, StageError
from .prompts import TemplateRegistry
from .records import read_records_jsonl
from .stats import corpus_stats
from .textproc import make_passage

logger = logging.getLogger(__name__)


def _load_config_file(path: str) -> dict[str, str]:
    """Flat key=value document; blank lines and # comments ignored."""
    values: dict[str, str] = {}
    for line in Path(path).read_text("utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _backend_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", choices=["replay", "remote"], default=None)
    parser.add_argument("--replay-script", default=None)
    parser.add_argument("--remote-url", default=None)
    parser.add_argument("--auth-token", default=None)
    parser.add_argument("--model", default=None)
    parser.add_argument("--templates-dir", default=None)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--config", default=None, help="flat key=value config file")


def _setting(args: argparse.Namespace, flag: str, env: str, default: str = "") -> str:
    value = getattr(args, flag, None)
    if value not in (None, ""):
        return str(value)
    if getattr(args, "config", None):
        file_values = _load_config_file(args.config)
        if flag in file_values:
            return file_values[flag]
    return os.environ.get(env, default)


def _temperatures(args: argparse.Namespace) -> dict[str, float]:
    """Per-step-tag decoding defaults from config keys like
    "temperature.mindmap.expand = 0.9" (bare "temperature" sets the default)."""
    values: dict[str, float] = {}
    if getattr(args, "config", None):
        for key, value in _load_config_file(args.config).items():
            if key == "temperature":
                values["default"] = float(value)
            elif key.startswith("temperature."):
                values[key[len("temperature."):]] = float(value)
    if os.environ.get("TEMPERATURE"):
        values.setdefault("default", float(os.environ["TEMPERATURE"]))
    return values


def _base_config(args: argparse.Namespace, out_dir: Path) -> RunConfig:
    return RunConfig(
        backend=_setting(args, "backend", "BACKEND", "replay"),
        replay_script=Path(p) if (p := _setting(args, "replay_script", "REPLAY_SCRIPT")) else None,
        remote_url=_setting(args, "remote_url", "REMOTE_URL"),
        auth_token=_setting(args, "auth_token", "AUTH_TOKEN"),
        model_name=_setting(args, "model", "MODEL_NAME"),
        templates_dir=Path(p) if (p := _setting(args, "templates_dir", "TEMPLATES_DIR")) else None,
        temperatures=_temperatures(args),
        workers=args.workers if hasattr(args, "workers") else 1,
        out_dir=out_dir,
    )


def _cmd_ingest(args: argparse.Namespace) -> int:
    config = RunConfig(
        input_path=Path(args.infile),
        corpus_format=args.format,
        table_filter=args.table_filter,
        passages_path=Path(args.out),
        out_dir=Path(args.out).parent,
        stages=("ingest",),
    )
    counts = pipeline.stage_ingest(config.resolved())
    print(f"ingested {counts['out']} passages (from {counts['in']})")
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    config = _base_config(args, out.parent)
    config.passages_path = Path(args.infile)
    config.records_path = out
    if args.target == "tables":
        config.modality = "tables"
        config.table_mode = args.mode
        config.query = args.query
        if args.chunks_out:
            config.chunks_path = Path(args.chunks_out)
    else:
        config.modality = "mindmap"
        config.max_steps = args.max_steps
        config.expand_samples = args.samples
    config = config.resolved()
    gateway = pipeline.build_gateway(config)
    registry = TemplateRegistry.load(config.templates_dir)
    counts = pipeline.stage_generate(config, gateway, registry)
    print(f"generated {counts['out']} records (from {counts['in']} passages); "
          f"LLM calls: {gateway.ledger.total()}")
    return 0


def _cmd_critique(args: argparse.Namespace) -> int:
    out = Path(args.out)
    config = _base_config(args, out.parent)
    config.records_path = Path(args.infile)
    config.passages_path = Path(args.passages)
    config.filtered_path = out
    config.verdicts_path = Path(args.report)
    config = config.resolved()
    gateway = pipeline.build_gateway(config)
    registry = TemplateRegistry.load(config.templates_dir)
    counts = pipeline.stage_critique(config, gateway, registry)
    print(f"{counts['out']} of {counts['in']} records pass all critics")
    return 0


def _cmd_eval_coverage(args: argparse.Namespace) -> int:
    curve_out = Path(args.curve_out)
    config = _base_config(args, curve_out.parent)
    config.filtered_path = Path(args.infile)
    config.passages_path = Path(args.passages)
    config.curve_path = curve_out
    config.qa_count = args.qa_count
    if args.out:
        config.covered_path = Path(args.out)
    if args.thresholds:
        config.thresholds = tuple(float(t) for t in args.thresholds.split(","))
    config = config.resolved()
    gateway = pipeline.build_gateway(config)
    registry = TemplateRegistry.load(config.templates_dir)
    counts = pipeline.stage_coverage(config, gateway, registry)
    print(f"scored coverage for {counts['out']} records; curve at {config.curve_path}")
    return 0


def _cmd_eval_external(args: argparse.Namespace) -> int:
    config = _base_config(args, Path("."))
    gateway = pipeline.build_gateway(config)
    registry = TemplateRegistry.load(config.templates_dir)
    triples = []
    for line in Path(args.triples).read_text("utf-8").splitlines():
        if line.strip():
            obj = json.loads(line)
            triples.append((obj["passage"], obj["question"], obj["answer"]))

    hits = 0
    scored = 0
    for i, (passage_text, question, answer) in enumerate(triples):
        passage = make_passage(f"external#{i}", passage_text)
        try:
            summary = _generate_for_mode(passage, args.mode, question, gateway, registry)
        except Exception:
            logger.exception("generation failed for triple %d; skipping", i)
            continue
        pair = QAPair(question=question, answer=answer, origin="external")
        accuracy = autoqa.evaluate_with_external_qa(
            summary, [(pair.question, pair.answer)], gateway, registry)
        hits += int(accuracy == 1.0)
        scored += 1
    if not scored:
        print("no triples scored")
        return 1
    print(f"external-qa accuracy ({args.mode}): {hits / scored:.3f} over {scored} triples")
    return 0


def _generate_for_mode(passage, mode: str, question: str, gateway, registry) -> StructSum:
    from . import mindmapgen

    if mode == "mindmap":
        root, _ = mindmapgen.iterative_generate(passage, gateway, registry)
        return StructSum.mind_map(root, passage.id)
    if mode == "multi":
        return tablegen.divide_and_generate(passage, gateway, registry)
    if mode == "single":
        return tablegen.generate_single_table(passage, gateway, registry)
    if mode == "query":
        return tablegen.generate_single_table(passage, gateway, registry, query=question)
    raise ValueError(f"unknown mode {mode!r}")


def _cmd_stats(args: argparse.Namespace) -> int:
    records = read_records_jsonl(args.infile)
    passages = {}
    if args.passages:
        passages = {p.id: p for p in pipeline.read_passages_jsonl(Path(args.passages))}
    chunks = {}
    if args.chunks and Path(args.chunks).exists():
        for line in Path(args.chunks).read_text("utf-8").splitlines():
            if line.strip():
                obj = json.loads(line)
                chunks[obj["passage_id"]] = list(obj["chunks"])
    report = corpus_stats(records, passages=passages, chunks=chunks)
    if args.format == "json":
        print(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    else:
        for section, values in report.to_dict().items():
            print(section)
            for key, value in values.items():
                print(f"  {key:26} {value:g}" if isinstance(value, float)
                      else f"  {key:26} {value}")
    return 0


def _cmd_study_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .study_api import build_store, create_app

    store = build_store(args.items, args.annotators.split(","),
                        log_path=args.log, replication=args.replication)
    app = create_app(store, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="structsum")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="split corpus documents into passages")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["jsonl", "text"], default="jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--table-filter", action="store_true",
                   help="keep only passages suited to table generation")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("generate", help="generate structured summaries")
    gen_sub = p.add_subparsers(dest="target", required=True)
    pt = gen_sub.add_parser("tables")
    pt.add_argument("--mode", choices=["multi", "single"], default="multi")
    pt.add_argument("--query", default=None)
    pt.add_argument("--in", dest="infile", required=True)
    pt.add_argument("--out", required=True)
    pt.add_argument("--chunks-out", default=None)
    _backend_args(pt)
    pt.set_defaults(func=_cmd_generate, target="tables")
    pm = gen_sub.add_parser("mindmaps")
    pm.add_argument("--max-steps", type=int, default=5)
    pm.add_argument("--samples", type=int, default=4)
    pm.add_argument("--in", dest="infile", required=True)
    pm.add_argument("--out", required=True)
    _backend_args(pm)
    pm.set_defaults(func=_cmd_generate, target="mindmaps")

    p = sub.add_parser("critique", help="run critics and filter records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--passages", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    _backend_args(p)
    p.set_defaults(func=_cmd_critique)

    p = sub.add_parser("evaluate", help="coverage and external-QA evaluation")
    eval_sub = p.add_subparsers(dest="what", required=True)
    pc = eval_sub.add_parser("coverage")
    pc.add_argument("--in", dest="infile", required=True)
    pc.add_argument("--passages", required=True)
    pc.add_argument("--curve-out", required=True)
    pc.add_argument("--out", default=None)
    pc.add_argument("--qa-count", type=int, default=10)
    pc.add_argument("--thresholds", default=None)
    _backend_args(pc)
    pc.set_defaults(func=_cmd_eval_coverage)
    pe = eval_sub.add_parser("external-qa")
    pe.add_argument("--triples", required=True)
    pe.add_argument("--mode", choices=["single", "multi", "mindmap", "query"], required=True)
    _backend_args(pe)
    pe.set_defaults(func=_cmd_eval_external)

    p = sub.add_parser("stats", help="corpus statistics over records")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--passages", default=None)
    p.add_argument("--chunks", default=None)
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("study", help="user study server")
    study_sub = p.add_subparsers(dest="what", required=True)
    ps = study_sub.add_parser("serve")
    ps.add_argument("--items", required=True, help="study questions JSONL")
    ps.add_argument("--annotators", required=True, help="comma-separated annotator ids")
    ps.add_argument("--replication", type=int, default=1)
    ps.add_argument("--log", default="study_log.jsonl")
    ps.add_argument("--ui-dir", default=None)
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8000)
    ps.set_defaults(func=_cmd_study_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as e:
        print(f"error in stage {e.stage}: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
