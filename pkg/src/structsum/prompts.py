"""Prompt template registry and renderer.

Templates are UTF-8 data files, one per pipeline prompt. The first line
declares the placeholders; the rest is the body. The template language has
single-brace named slots, one list-expansion construct, and doubled braces
for literals:

    {name}                      scalar slot
    {#name}...{/name}           rendered once per list element, elements
                                joined with a newline; {i} is the 1-based
                                index and {item} the element inside the block
    {{ and }}                   literal braces
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

_ESC_OPEN = "\x00"
_ESC_CLOSE = "\x01"
_LOOP_RE = re.compile(r"\{#([a-z_][a-z0-9_.]*)\}(.*?)\{/\1\}", re.DOTALL)
_SLOT_RE = re.compile(r"\{([a-z_][a-z0-9_.]*)\}")

REQUIRED_TEMPLATES = (
    "table.segment",
    "table.generate",
    "mindmap.root",
    "mindmap.continue",
    "mindmap.expand",
    "mindmap.json_repair",
    "critic.factuality.table",
    "critic.factuality.mindmap",
    "critic.local.table",
    "critic.local.mindmap",
    "critic.global.mindmap",
    "autoqa.genqa",
    "autoqa.answer",
    "autoqa.equivalence",
)


class TemplateError(ValueError):
    """A template file is malformed."""


class TemplateNotFound(KeyError):
    pass


class MissingBinding(KeyError):
    pass


def _tokenize_escapes(body: str) -> str:
    return body.replace("{{", _ESC_OPEN).replace("}}", _ESC_CLOSE)


def _restore_escapes(text: str) -> str:
    return text.replace(_ESC_OPEN, "{").replace(_ESC_CLOSE, "}")


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    placeholders: tuple[str, ...]
    body: str

    def __post_init__(self) -> None:
        declared = set(self.placeholders) | {"i", "item"}
        tokenized = _tokenize_escapes(self.body)
        for m in _LOOP_RE.finditer(tokenized):
            if m.group(1) not in self.placeholders:
                raise TemplateError(f"{self.name}: loop over undeclared placeholder {m.group(1)!r}")
            for slot in _SLOT_RE.findall(m.group(2)):
                if slot not in declared:
                    raise TemplateError(f"{self.name}: undeclared placeholder {slot!r}")
        outside = _LOOP_RE.sub("", tokenized)
        for slot in _SLOT_RE.findall(outside):
            if slot not in self.placeholders:
                raise TemplateError(f"{self.name}: undeclared placeholder {slot!r}")

    @classmethod
    def from_text(cls, name: str, text: str) -> PromptTemplate:
        header, _, body = text.partition("\n")
        if not header.startswith("placeholders:"):
            raise TemplateError(f"{name}: first line must declare placeholders")
        names = tuple(p.strip() for p in header[len("placeholders:"):].split(",") if p.strip())
        return cls(name=name, placeholders=names, body=body)


def render_template(template: PromptTemplate, bindings: Mapping[str, object]) -> str:
    """Render a template with the given bindings; pure and deterministic."""

    def lookup(scope: Mapping[str, object], name: str) -> str:
        if name not in scope:
            raise MissingBinding(f"{template.name}: no binding for {name!r}")
        value = scope[name]
        if isinstance(value, (list, tuple)):
            raise TemplateError(f"{template.name}: list bound to scalar slot {name!r}")
        return str(value)

    def expand_loop(m: re.Match) -> str:
        name, block = m.group(1), m.group(2)
        if name not in bindings:
            raise MissingBinding(f"{template.name}: no binding for {name!r}")
        items = bindings[name]
        if isinstance(items, str) or not isinstance(items, Sequence):
            raise TemplateError(f"{template.name}: loop placeholder {name!r} needs a list")
        parts = []
        for idx, item in enumerate(items, start=1):
            scope = dict(bindings)
            scope["i"] = str(idx)
            scope["item"] = str(item)
            parts.append(_SLOT_RE.sub(lambda mm: lookup(scope, mm.group(1)), block))
        return "\n".join(parts)

    text = _tokenize_escapes(template.body)
    text = _LOOP_RE.sub(expand_loop, text)
    text = _SLOT_RE.sub(lambda m: lookup(bindings, m.group(1)), text)
    return _restore_escapes(text)


class TemplateRegistry:
    """Immutable name → template mapping loaded from a directory."""

    def __init__(self, templates: Mapping[str, PromptTemplate]) -> None:
        self._templates = dict(templates)

    @classmethod
    def load(cls, directory: str | Path | None = None) -> TemplateRegistry:
        """Load every *.txt template from `directory`, or the packaged catalog."""
        templates: dict[str, PromptTemplate] = {}
        if directory is None:
            root = resources.files(__package__).joinpath("templates")
            entries = sorted((p for p in root.iterdir() if p.name.endswith(".txt")),
                             key=lambda p: p.name)
        else:
            entries = sorted(Path(directory).glob("*.txt"))
        for entry in entries:
            name = entry.name[:-len(".txt")]
            text = entry.read_text(encoding="utf-8")
            if name in templates:
                raise TemplateError(f"duplicate template name {name!r}")
            templates[name] = PromptTemplate.from_text(name, text)
        return cls(templates)

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._templates))

    def get(self, name: str) -> PromptTemplate:
        try:
            return self._templates[name]
        except KeyError:
            raise TemplateNotFound(name) from None

    def render(self, name: str, bindings: Mapping[str, object]) -> str:
        return render_template(self.get(name), bindings)
