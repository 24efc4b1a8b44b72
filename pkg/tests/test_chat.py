"""Session store: grounding seed, isolation, atomicity, TTL, persistence."""

from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone

import pytest

from medchat.analysis import DiagnosticGrade, compute_cdr
from medchat.chat import Author, FileSessionPersistence, SessionManager
from medchat.errors import EmptyQuestion, FixtureMiss, SessionNotFound
from medchat.llm import LlmBackendConfig, LlmMode
from medchat.orchestration import FinalReport
from medchat.prompts import build_core_prompt

from conftest import record_scripted


def make_report(markdown="# Report\n\nFindings look glaucomatous.") -> FinalReport:
    return FinalReport(markdown=markdown, generated_at=datetime.now(timezone.utc))


def make_core(note="IOP 28 mmHg OS"):
    return build_core_prompt(
        DiagnosticGrade.GLAUCOMA_DETECTED, compute_cdr(3844, 6156), note
    )


def seed_messages(session) -> list[dict]:
    return [{"role": "system", "content": session.seed.content}]


def record_exchange(fixture_dir, session, history: list[dict], question: str) -> str:
    """Record the reply fixture for one upcoming question."""
    messages = seed_messages(session) + history + [{"role": "user", "content": question}]
    return record_scripted(fixture_dir, messages)


def replay_config(fixture_dir) -> LlmBackendConfig:
    return LlmBackendConfig(mode=LlmMode.REPLAY, fixture_dir=fixture_dir)


class TestOpenSession:
    def test_seeded_with_case_grounding(self):
        manager = SessionManager()
        session = manager.open_session("case-1", make_report(), make_core())
        assert session.seed.author is Author.SYSTEM
        assert make_core().text in session.seed.content
        assert "Findings look glaucomatous." in session.seed.content
        assert session.history == []
        assert manager.transcript(session.session_id) == []

    def test_ids_unique_across_many_sessions(self):
        manager = SessionManager()
        report, core = make_report(), make_core()
        ids = {
            manager.open_session("case", report, core).session_id
            for _ in range(10_000)
        }
        assert len(ids) == 10_000


class TestChat:
    def test_exchange_appends_pair_and_returns_reply(self, tmp_path):
        manager = SessionManager()
        session = manager.open_session("case-1", make_report(), make_core())
        question = "What does a cup-to-disc ratio of 0.62 mean?"
        expected = record_exchange(tmp_path, session, [], question)
        answer = manager.chat(session.session_id, question, replay_config(tmp_path))
        assert answer == expected
        transcript = manager.transcript(session.session_id)
        assert [m.author for m in transcript] == [Author.USER, Author.ASSISTANT]
        assert transcript[0].content == question
        assert transcript[1].content == answer

    def test_history_grows_by_two_per_exchange(self, tmp_path):
        manager = SessionManager()
        session = manager.open_session("case-1", make_report(), make_core())
        history: list[dict] = []
        for n, question in enumerate(
            ["First question?", "Second question?", "Third question?"], start=1
        ):
            answer = record_exchange(tmp_path, session, history, question)
            manager.chat(session.session_id, question, replay_config(tmp_path))
            history += [
                {"role": "user", "content": question},
                {"role": "assistant", "content": answer},
            ]
            assert len(manager.transcript(session.session_id)) == 2 * n

    def test_full_history_resent_each_turn(self, tmp_path):
        manager = SessionManager()
        session = manager.open_session("case-1", make_report(), make_core())
        q1 = "What does a cup-to-disc ratio of 0.62 mean?"
        a1 = record_exchange(tmp_path, session, [], q1)
        manager.chat(session.session_id, q1, replay_config(tmp_path))
        # The second fixture is keyed on the seed plus the full first exchange;
        # replay succeeding proves the exact message list that was sent.
        q2 = "What follow-up testing do you recommend?"
        history = [
            {"role": "user", "content": q1},
            {"role": "assistant", "content": a1},
        ]
        a2 = record_exchange(tmp_path, session, history, q2)
        assert manager.chat(session.session_id, q2, replay_config(tmp_path)) == a2

    def test_empty_question_rejected_atomically(self, tmp_path):
        manager = SessionManager()
        session = manager.open_session("case-1", make_report(), make_core())
        with pytest.raises(EmptyQuestion):
            manager.chat(session.session_id, "   ", replay_config(tmp_path))
        assert manager.transcript(session.session_id) == []

    def test_unknown_session(self, tmp_path):
        manager = SessionManager()
        with pytest.raises(SessionNotFound):
            manager.chat("missing", "hello?", replay_config(tmp_path))
        with pytest.raises(SessionNotFound):
            manager.transcript("missing")

    def test_failed_backend_leaves_history_unchanged(self, tmp_path):
        manager = SessionManager()
        session = manager.open_session("case-1", make_report(), make_core())
        q1 = "Recorded question?"
        record_exchange(tmp_path, session, [], q1)
        manager.chat(session.session_id, q1, replay_config(tmp_path))
        before = manager.transcript(session.session_id)
        with pytest.raises(FixtureMiss):
            manager.chat(
                session.session_id, "Unrecorded question?", replay_config(tmp_path)
            )
        assert manager.transcript(session.session_id) == before

    def test_isolation_between_interleaved_sessions(self, tmp_path):
        manager = SessionManager()
        session_a = manager.open_session("case-a", make_report("# A report"), make_core())
        session_b = manager.open_session("case-b", make_report("# B report"), make_core())
        history_a: list[dict] = []
        history_b: list[dict] = []
        for i in range(3):
            qa, qb = f"Question A{i}?", f"Question B{i}?"
            aa = record_exchange(tmp_path, session_a, history_a, qa)
            ab = record_exchange(tmp_path, session_b, history_b, qb)
            manager.chat(session_a.session_id, qa, replay_config(tmp_path))
            manager.chat(session_b.session_id, qb, replay_config(tmp_path))
            history_a += [{"role": "user", "content": qa}, {"role": "assistant", "content": aa}]
            history_b += [{"role": "user", "content": qb}, {"role": "assistant", "content": ab}]
        contents_a = {m.content for m in manager.transcript(session_a.session_id)}
        contents_b = {m.content for m in manager.transcript(session_b.session_id)}
        assert contents_a.isdisjoint(contents_b)
        assert len(contents_a) == 6 and len(contents_b) == 6

    def test_last_active_monotone(self, tmp_path):
        manager = SessionManager()
        session = manager.open_session("case-1", make_report(), make_core())
        stamps = [session.last_active]
        history: list[dict] = []
        for question in ["One?", "Two?"]:
            answer = record_exchange(tmp_path, session, history, question)
            manager.chat(session.session_id, question, replay_config(tmp_path))
            history += [
                {"role": "user", "content": question},
                {"role": "assistant", "content": answer},
            ]
            stamps.append(manager.get_session(session.session_id).last_active)
        assert stamps == sorted(stamps)

    def test_ttl_expiry(self, tmp_path):
        manager = SessionManager(ttl_s=0.05)
        session = manager.open_session("case-1", make_report(), make_core())
        time.sleep(0.1)
        with pytest.raises(SessionNotFound):
            manager.transcript(session.session_id)

    def test_history_cap_drops_oldest_pairs_keeps_seed(self, tmp_path):
        manager = SessionManager(max_messages=4)
        session = manager.open_session("case-1", make_report(), make_core())
        history: list[dict] = []
        questions = ["Cap one?", "Cap two?", "Cap three?"]
        for question in questions:
            answer = record_exchange(tmp_path, session, history, question)
            manager.chat(session.session_id, question, replay_config(tmp_path))
            history += [
                {"role": "user", "content": question},
                {"role": "assistant", "content": answer},
            ]
            # the manager truncates its own copy after each exchange
            history = history[-4:]
        transcript = manager.transcript(session.session_id)
        assert len(transcript) == 4
        assert transcript[0].content == "Cap two?"
        assert manager.get_session(session.session_id).seed.author is Author.SYSTEM

    def test_same_session_chats_serialize(self, tmp_path):
        manager = SessionManager()
        session = manager.open_session("case-1", make_report(), make_core())
        q1 = "Serial one?"
        a1 = record_exchange(tmp_path, session, [], q1)
        q2 = "Serial two?"
        record_exchange(
            tmp_path,
            session,
            [{"role": "user", "content": q1}, {"role": "assistant", "content": a1}],
            q2,
        )
        barrier = threading.Barrier(2)
        results = []

        def worker(question):
            barrier.wait()
            try:
                results.append(
                    manager.chat(session.session_id, question, replay_config(tmp_path))
                )
            except FixtureMiss as exc:
                results.append(exc)

        with ThreadPoolExecutor(max_workers=2) as pool:
            pool.submit(worker, q1)
            pool.submit(worker, q2)
        # q2's fixture assumes q1 already happened; both succeeding in either
        # order is only possible if the two calls serialized as q1 then q2.
        # A FixtureMiss for q2-first is also a serialization proof point but
        # the lock is taken before the transport call, so with q1 submitted
        # first the deterministic outcome is two successes.
        transcript = manager.transcript(session.session_id)
        assert len(transcript) in (2, 4)
        assert len(results) == 2


class TestPersistence:
    def test_sessions_survive_restart(self, tmp_path):
        persist = FileSessionPersistence(tmp_path / "sessions")
        manager = SessionManager(persistence=persist)
        session = manager.open_session("case-1", make_report(), make_core())
        question = "Persisted question?"
        record_exchange(tmp_path / "fixtures", session, [], question)
        manager.chat(
            session.session_id, question, replay_config(tmp_path / "fixtures")
        )

        reloaded = SessionManager(
            persistence=FileSessionPersistence(tmp_path / "sessions")
        )
        transcript = reloaded.transcript(session.session_id)
        assert [m.content for m in transcript][0] == question
        assert reloaded.get_session(session.session_id).case_id == "case-1"
