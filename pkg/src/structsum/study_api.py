"""HTTP JSON endpoints for the study server, plus static hosting of the UI.

The question endpoint deliberately returns no context; context is only
served through the reveal endpoint, so the UI cannot show (and the annotator
cannot read) the content before the timer starts.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .model import StructSum
from .study import (
    AlreadyAnswered,
    NotAssigned,
    ResponseNotFound,
    StudyQuestion,
    StudyResponse,
    StudyStore,
    build_assignments,
    build_items,
    COMBINATIONS,
)
from .textproc import make_passage


class RevealRequest(BaseModel):
    annotator: str
    item_id: str


class ResponseRequest(BaseModel):
    annotator: str
    item_id: str
    answer_text: str | None = None
    unanswerable: bool = False
    elapsed_ms: int = Field(gt=0)


class GradeRequest(BaseModel):
    annotator: str
    item_id: str
    verdict: str


def create_app(store: StudyStore, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="structsum study server")

    @app.get("/api/next")
    def next_item(annotator: str):
        try:
            item = store.next_item(annotator)
        except NotAssigned as e:
            raise HTTPException(status_code=404, detail=str(e))
        if item is None:
            return {"done": True, "item_id": None, "question": None}
        return {"done": False, "item_id": item.item_id, "question": item.question}

    @app.post("/api/reveal")
    def reveal(req: RevealRequest):
        try:
            return store.reveal(req.annotator, req.item_id)
        except NotAssigned as e:
            raise HTTPException(status_code=404, detail=str(e))

    @app.post("/api/response")
    def response(req: ResponseRequest):
        try:
            store.record_response(StudyResponse(
                annotator_id=req.annotator,
                item_id=req.item_id,
                answer_text=req.answer_text,
                unanswerable=req.unanswerable,
                elapsed_ms=req.elapsed_ms,
            ))
        except NotAssigned as e:
            raise HTTPException(status_code=404, detail=str(e))
        except AlreadyAnswered as e:
            raise HTTPException(status_code=409, detail=str(e))
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return {"ok": True}

    @app.get("/api/summary")
    def summary():
        return store.summarize()

    @app.post("/api/grade")
    def grade(req: GradeRequest):
        try:
            store.grade_response(req.item_id, req.annotator, req.verdict)
        except ResponseNotFound as e:
            raise HTTPException(status_code=404, detail=str(e))
        except ValueError as e:
            raise HTTPException(status_code=422, detail=str(e))
        return {"ok": True}

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def load_study_questions(path: str | Path) -> list[StudyQuestion]:
    """Load study questions from JSONL rows of
    {question_id, question, passage: {id, text}, structsum: {...}}."""
    questions = []
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        passage = make_passage(obj["passage"]["id"], obj["passage"]["text"])
        questions.append(StudyQuestion(
            question_id=obj["question_id"],
            question=obj["question"],
            passage=passage,
            structsum=StructSum.from_json_dict(obj["structsum"], passage.id),
        ))
    return questions


def build_store(questions_path: str | Path, annotators: list[str],
                log_path: str | Path | None = None, replication: int = 1) -> StudyStore:
    questions = load_study_questions(questions_path)
    items = build_items(questions)
    assignments = build_assignments([q.question_id for q in questions],
                                    COMBINATIONS, annotators, replication=replication)
    return StudyStore(items, assignments, log_path=log_path)
