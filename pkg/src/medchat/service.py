"""HTTP gateway: case upload and storage, report generation, chat, PDF export.

Case lifecycle: UPLOADED -> PROCESSING -> COMPLETE | FAILED, with
FAILED -> PROCESSING permitted on retry. Report generation is synchronous
and mutually exclusive per case (a second overlapping call gets 409).
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from fastapi import FastAPI, File, Form, UploadFile
from fastapi.responses import JSONResponse, Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .chat import FileSessionPersistence, SessionManager
from .config import ServiceConfig
from .errors import (
    AlreadyProcessing,
    CaseNotFound,
    EmptyQuestion,
    MedChatError,
    PipelineStageError,
    SessionNotFound,
)
from .orchestration import PipelineResult, run_pipeline
from .pdfreport import ReportBundle, encode_overlay_png, render_pdf
from .prompts import GRADE_PHRASES
from .vision import FundusImage


class CaseStatus(str, Enum):
    UPLOADED = "UPLOADED"
    PROCESSING = "PROCESSING"
    COMPLETE = "COMPLETE"
    FAILED = "FAILED"


@dataclass
class FundusCase:
    case_id: str
    image: FundusImage
    note: str | None
    status: CaseStatus = CaseStatus.UPLOADED
    result: PipelineResult | None = None
    error: tuple[str, str] | None = None  # (stage, message)
    session_id: str | None = None
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))


class CaseStore:
    """Thread-safe case registry enforcing the status machine."""

    def __init__(self) -> None:
        self._cases: dict[str, FundusCase] = {}
        self._lock = threading.Lock()

    def add(self, image: FundusImage, note: str | None) -> FundusCase:
        case = FundusCase(case_id=uuid.uuid4().hex, image=image, note=note)
        with self._lock:
            self._cases[case.case_id] = case
        return case

    def get(self, case_id: str) -> FundusCase:
        with self._lock:
            case = self._cases.get(case_id)
        if case is None:
            raise CaseNotFound(f"no case {case_id!r}")
        return case

    def begin_processing(self, case_id: str) -> FundusCase:
        """Atomically move UPLOADED/FAILED -> PROCESSING."""
        with self._lock:
            case = self._cases.get(case_id)
            if case is None:
                raise CaseNotFound(f"no case {case_id!r}")
            if case.status is CaseStatus.PROCESSING:
                raise AlreadyProcessing(f"case {case_id} is already processing")
            if case.status is CaseStatus.COMPLETE:
                raise AlreadyProcessing(f"case {case_id} already has a report")
            case.status = CaseStatus.PROCESSING
            case.result = None
            case.error = None
            return case

    def complete(self, case_id: str, result: PipelineResult, session_id: str) -> None:
        with self._lock:
            case = self._cases[case_id]
            case.status = CaseStatus.COMPLETE
            case.result = result
            case.error = None
            case.session_id = session_id

    def fail(self, case_id: str, stage: str, message: str) -> None:
        with self._lock:
            case = self._cases[case_id]
            case.status = CaseStatus.FAILED
            case.result = None
            case.error = (stage, message)


class ChatBody(BaseModel):
    question: str


def _error(status: int, code: str, detail: str, **extra) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": code, "detail": detail, **extra}
    )


def create_app(config: ServiceConfig) -> FastAPI:
    """Wire stores and pipeline into the REST app."""
    app = FastAPI(title="medchat", docs_url=None, redoc_url=None)
    cases = CaseStore()
    persistence = (
        FileSessionPersistence(config.persistence_path)
        if config.persistence_path
        else None
    )
    sessions = SessionManager(ttl_s=config.session_ttl_s, persistence=persistence)
    app.state.cases = cases
    app.state.sessions = sessions
    app.state.config = config

    @app.post("/api/cases", status_code=201)
    def upload_case(
        image: UploadFile = File(...), note: str | None = Form(None)
    ):
        data = image.file.read(config.max_upload_bytes + 1)
        if len(data) > config.max_upload_bytes:
            return _error(
                413,
                "too_large",
                f"upload exceeds {config.max_upload_bytes} bytes",
            )
        try:
            fundus = FundusImage.from_bytes(data)
        except ValueError as exc:
            return _error(400, "unsupported_image", str(exc))
        # An empty or blank note field means "no note".
        trimmed = note.strip() if note else ""
        case = cases.add(fundus, trimmed or None)
        return JSONResponse(status_code=201, content={"case_id": case.case_id})

    @app.post("/api/cases/{case_id}/report")
    def generate_report(case_id: str):
        try:
            case = cases.begin_processing(case_id)
        except CaseNotFound as exc:
            return _error(404, "case_not_found", str(exc))
        except AlreadyProcessing as exc:
            return _error(409, "already_processing", str(exc))
        try:
            result = run_pipeline(
                case.image,
                case.note,
                config.vision,
                config.llm,
                deadline_s=config.request_deadline_s,
            )
        except PipelineStageError as exc:
            cases.fail(case_id, exc.stage, str(exc.cause))
            return _error(
                502, "pipeline_failed", str(exc.cause), stage=exc.stage
            )
        session = sessions.open_session(
            case_id, result.final_report, result.core_prompt
        )
        cases.complete(case_id, result, session.session_id)
        return {
            "grade": result.grade.label,
            "cdr_display": result.cdr.display_string,
            "roles": list(result.roles.roles),
            "sub_reports": [
                {"role": r.role, "text": r.text} for r in result.sub_reports
            ],
            "final_report_markdown": result.final_report.markdown,
            "session_id": session.session_id,
        }

    @app.post("/api/sessions/{session_id}/chat")
    def session_chat(session_id: str, body: ChatBody):
        try:
            answer = sessions.chat(session_id, body.question, config.llm)
        except SessionNotFound as exc:
            return _error(404, "session_not_found", str(exc))
        except EmptyQuestion as exc:
            return _error(422, "empty_question", str(exc))
        except MedChatError as exc:
            return _error(502, "chat_failed", str(exc))
        return {"answer": answer}

    @app.get("/api/cases/{case_id}")
    def case_status(case_id: str):
        try:
            case = cases.get(case_id)
        except CaseNotFound as exc:
            return _error(404, "case_not_found", str(exc))
        payload: dict = {
            "case_id": case.case_id,
            "status": case.status.value,
            "created_at": case.created_at.isoformat(),
            "has_note": case.note is not None,
        }
        if case.status is CaseStatus.COMPLETE and case.result is not None:
            payload["grade"] = case.result.grade.label
            payload["cdr_display"] = case.result.cdr.display_string
            payload["session_id"] = case.session_id
        if case.status is CaseStatus.FAILED and case.error is not None:
            payload["error"] = {"stage": case.error[0], "detail": case.error[1]}
        return payload

    @app.get("/api/cases/{case_id}/overlay")
    def case_overlay(case_id: str):
        try:
            case = cases.get(case_id)
        except CaseNotFound as exc:
            return _error(404, "case_not_found", str(exc))
        if case.status is not CaseStatus.COMPLETE or case.result is None:
            return _error(409, "report_not_ready", "case has no completed report")
        return Response(
            content=encode_overlay_png(case.result.overlay), media_type="image/png"
        )

    @app.get("/api/cases/{case_id}/pdf")
    def case_pdf(case_id: str):
        try:
            case = cases.get(case_id)
        except CaseNotFound as exc:
            return _error(404, "case_not_found", str(exc))
        if case.status is not CaseStatus.COMPLETE or case.result is None:
            return _error(409, "report_not_ready", "case has no completed report")
        result = case.result
        try:
            transcript = (
                sessions.transcript(case.session_id) if case.session_id else []
            )
        except SessionNotFound:
            transcript = []  # expired session: record still renders
        bundle = ReportBundle(
            case_id=case.case_id,
            created_at=case.created_at,
            grade_label=result.grade.label,
            grade_phrase=GRADE_PHRASES[result.grade],
            cdr_display=result.cdr.display_string,
            note=case.note,
            overlay=result.overlay,
            report_markdown=result.final_report.markdown,
            sub_reports=result.sub_reports,
            transcript=transcript,
        )
        return Response(
            content=render_pdf(bundle),
            media_type="application/pdf",
            headers={
                "Content-Disposition": (
                    f'attachment; filename="medchat-report-{case.case_id}.pdf"'
                )
            },
        )

    if config.static_dir is not None and config.static_dir.is_dir():
        app.mount(
            "/", StaticFiles(directory=str(config.static_dir), html=True), name="ui"
        )

    return app
