"""Structured summaries of text: tables and mind maps generated through a
pluggable LLM backend, validated by critics, and scored with QA coverage."""

from .model import (
    MindMapNode,
    Passage,
    QAPair,
    StructSum,
    Table,
    mindmap_paths,
    mindmap_to_json_text,
    mindmap_to_toc,
    parse_mindmap_json,
    table_to_markdown,
)

__all__ = [
    "MindMapNode",
    "Passage",
    "QAPair",
    "StructSum",
    "Table",
    "mindmap_paths",
    "mindmap_to_json_text",
    "mindmap_to_toc",
    "parse_mindmap_json",
    "table_to_markdown",
]
