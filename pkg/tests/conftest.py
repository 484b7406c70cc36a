from __future__ import annotations

import random
from pathlib import Path

import pytest

from structsum.llm import CallLedger, LlmGateway, ReplayBackend
from structsum.model import MindMapNode, Table
from structsum.prompts import TemplateRegistry
from structsum.textproc import make_passage

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def registry() -> TemplateRegistry:
    return TemplateRegistry.load()


@pytest.fixture()
def mersey_passage():
    return make_passage("mersey#0", (FIXTURES / "mersey_class.txt").read_text("utf-8").strip())


@pytest.fixture()
def kay_daly_passage():
    return make_passage("kay_daly#0", (FIXTURES / "kay_daly.txt").read_text("utf-8").strip())


def replay_gateway(script) -> LlmGateway:
    return LlmGateway(ReplayBackend(script), CallLedger())


def random_tree(rng: random.Random, max_children: int = 3, max_depth: int = 3) -> MindMapNode:
    label = "n" + str(rng.randrange(10_000))

    def build(depth: int) -> MindMapNode:
        n_children = 0
        if depth < max_depth:
            n_children = rng.randrange(max_children + 1)
        return MindMapNode(
            label="n" + str(rng.randrange(10_000)),
            children=tuple(build(depth + 1) for _ in range(n_children)),
        )

    root = build(0)
    return MindMapNode(label=label, children=root.children)


_CELL_ALPHABET = "abc XY|12,.-"


def random_table(rng: random.Random, well_formed: bool = True) -> Table:
    cols = rng.randrange(1, 5)
    rows = rng.randrange(0, 6)

    def cell() -> str:
        return "".join(rng.choice(_CELL_ALPHABET) for _ in range(rng.randrange(1, 8))).strip() or "x"

    header = tuple(cell() for _ in range(cols))
    body = []
    for _ in range(rows):
        width = cols if well_formed else max(1, cols + rng.choice([-1, 0, 1]))
        body.append(tuple(cell() for _ in range(width)))
    return Table(header=header, rows=tuple(body))


def random_structsum(rng: random.Random):
    from structsum.model import StructSum

    kind = rng.choice(["single", "multi", "mindmap"])
    if kind == "mindmap":
        return StructSum.mind_map(random_tree(rng), "p")
    if kind == "single":
        return StructSum.single_table(random_table(rng), "p")
    return StructSum.multi_table(
        [random_table(rng) for _ in range(rng.randrange(1, 4))], "p")


def passing_critic_script(summary) -> list[tuple[str, list[str]]]:
    """Replay script satisfying critique_structsum with all-pass answers."""
    from structsum.model import mindmap_paths

    script: list[tuple[str, list[str]]] = []
    if summary.kind == "mind_map":
        paths = mindmap_paths(summary.root)
        script.append(("critic.factuality.mindmap",
                       ["\n".join(f"Path {i+1}: [1]" for i in range(len(paths)))]))
        script.extend(("critic.local.mindmap", ["yes"]) for _ in paths)
        script.append(("critic.global.mindmap", ["yes"]))
    else:
        for table in summary.all_tables():
            script.append(("critic.factuality.table",
                           ["\n".join(f"Row {i+1}: [1]" for i in range(len(table.rows)))]))
        for table in summary.all_tables():
            script.extend(("critic.local.table", ["yes"]) for _ in table.header)
    return script
