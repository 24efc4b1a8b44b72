"""Isolated per-session follow-up chat over a generated report.

Each session is seeded with one system message (core prompt + final report)
so answers stay grounded in the case. Histories are isolated per session,
chat turns are atomic (a failed call leaves history untouched), and calls
within one session are serialized.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .errors import EmptyCompletion, EmptyQuestion, SessionNotFound
from .llm import LlmBackendConfig, build_transport
from .orchestration import FinalReport
from .prompts import CorePrompt

DEFAULT_SESSION_TTL_S = 24 * 3600.0
# User/assistant messages kept per session; oldest pairs are dropped beyond
# this, the system seed never is.
DEFAULT_MAX_MESSAGES = 64


class Author(str, Enum):
    SYSTEM = "SYSTEM"
    USER = "USER"
    ASSISTANT = "ASSISTANT"


@dataclass(frozen=True)
class ChatMessage:
    author: Author
    content: str
    at: datetime

    def __post_init__(self) -> None:
        if not self.content.strip():
            raise ValueError("message content must be non-empty")


@dataclass
class ChatSession:
    session_id: str
    case_id: str
    seed: ChatMessage  # the grounding SYSTEM message
    history: list[ChatMessage] = field(default_factory=list)  # USER/ASSISTANT only
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))
    last_active: datetime = field(default_factory=lambda: datetime.now(timezone.utc))


def _now() -> datetime:
    return datetime.now(timezone.utc)


class FileSessionPersistence:
    """Optional JSON-per-session mirror of the in-memory store."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.directory / f"{session_id}.json"

    def save(self, session: ChatSession) -> None:
        def encode(msg: ChatMessage) -> dict:
            return {
                "author": msg.author.value,
                "content": msg.content,
                "at": msg.at.isoformat(),
            }

        payload = {
            "session_id": session.session_id,
            "case_id": session.case_id,
            "created_at": session.created_at.isoformat(),
            "last_active": session.last_active.isoformat(),
            "seed": encode(session.seed),
            "history": [encode(m) for m in session.history],
        }
        self._path(session.session_id).write_text(
            json.dumps(payload, indent=2), encoding="utf-8"
        )

    def delete(self, session_id: str) -> None:
        self._path(session_id).unlink(missing_ok=True)

    def load_all(self) -> list[ChatSession]:
        def decode(raw: dict) -> ChatMessage:
            return ChatMessage(
                author=Author(raw["author"]),
                content=raw["content"],
                at=datetime.fromisoformat(raw["at"]),
            )

        sessions = []
        for path in sorted(self.directory.glob("*.json")):
            raw = json.loads(path.read_text(encoding="utf-8"))
            sessions.append(
                ChatSession(
                    session_id=raw["session_id"],
                    case_id=raw["case_id"],
                    seed=decode(raw["seed"]),
                    history=[decode(m) for m in raw["history"]],
                    created_at=datetime.fromisoformat(raw["created_at"]),
                    last_active=datetime.fromisoformat(raw["last_active"]),
                )
            )
        return sessions


class SessionManager:
    """Session store: safe for concurrent use across sessions, serialized
    within one session, idle sessions evicted lazily after the TTL."""

    def __init__(
        self,
        ttl_s: float = DEFAULT_SESSION_TTL_S,
        max_messages: int = DEFAULT_MAX_MESSAGES,
        persistence: FileSessionPersistence | None = None,
    ):
        self._ttl_s = ttl_s
        self._max_messages = max_messages
        self._persistence = persistence
        self._sessions: dict[str, ChatSession] = {}
        self._session_locks: dict[str, threading.Lock] = {}
        self._store_lock = threading.Lock()
        if persistence is not None:
            for session in persistence.load_all():
                self._sessions[session.session_id] = session
                self._session_locks[session.session_id] = threading.Lock()

    def open_session(
        self, case_id: str, final_report: FinalReport, core: CorePrompt
    ) -> ChatSession:
        """New session grounded in this case's evidence and report."""
        seed = ChatMessage(
            author=Author.SYSTEM,
            content=core.text + "\n\n" + final_report.markdown,
            at=_now(),
        )
        session = ChatSession(
            session_id=uuid.uuid4().hex, case_id=case_id, seed=seed
        )
        with self._store_lock:
            self._sessions[session.session_id] = session
            self._session_locks[session.session_id] = threading.Lock()
        self._persist(session)
        return session

    def _get(self, session_id: str) -> tuple[ChatSession, threading.Lock]:
        with self._store_lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise SessionNotFound(f"no session {session_id!r}")
            idle = (_now() - session.last_active).total_seconds()
            if idle > self._ttl_s:
                del self._sessions[session_id]
                del self._session_locks[session_id]
                if self._persistence is not None:
                    self._persistence.delete(session_id)
                raise SessionNotFound(f"session {session_id!r} expired")
            return session, self._session_locks[session_id]

    def chat(self, session_id: str, question: str, backend: LlmBackendConfig) -> str:
        """One follow-up exchange; history grows by exactly 2 on success."""
        session, lock = self._get(session_id)
        if not question.strip():
            raise EmptyQuestion("question is blank")
        transport = build_transport(backend)
        with lock:
            asked_at = _now()
            messages = [{"role": "system", "content": session.seed.content}]
            for msg in session.history:
                messages.append(
                    {"role": msg.author.value.lower(), "content": msg.content}
                )
            messages.append({"role": "user", "content": question})
            answer = transport.complete(messages)
            if not answer.strip():
                raise EmptyCompletion("assistant returned a blank reply")
            # Commit both messages only after a successful completion.
            session.history.append(
                ChatMessage(author=Author.USER, content=question, at=asked_at)
            )
            session.history.append(
                ChatMessage(author=Author.ASSISTANT, content=answer, at=_now())
            )
            while len(session.history) > self._max_messages:
                del session.history[:2]
            session.last_active = _now()
            self._persist(session)
        return answer

    def transcript(self, session_id: str) -> list[ChatMessage]:
        """USER/ASSISTANT messages in order; the system seed is not
        user-facing."""
        session, lock = self._get(session_id)
        with lock:
            return list(session.history)

    def get_session(self, session_id: str) -> ChatSession:
        session, _ = self._get(session_id)
        return session

    def _persist(self, session: ChatSession) -> None:
        if self._persistence is not None:
            self._persistence.save(session)
