"""Acceptance suite: one test per release criterion, tolerances pinned.

Run with `pytest tests/test_acceptance.py -s` to see one pass line per
criterion.
"""

from __future__ import annotations

import math
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from medchat.analysis import DiagnosticGrade, compute_cdr, grade
from medchat.chat import SessionManager
from medchat.config import ServiceConfig
from medchat.errors import FixtureMiss, PartialAgentFailure
from medchat.llm import LlmBackendConfig, LlmMode
from medchat.orchestration import (
    FinalReport,
    RoleSet,
    SubReport,
    _generate_sub_reports,
    generate_sub_reports,
)
from medchat.prompts import (
    build_core_prompt,
    build_director_prompt,
    build_role_prompt,
)
from medchat.selfcheck import run_selfcheck, selfcheck_image
from medchat.service import create_app
from medchat.vision import CUP, DISC, SegmentationMap, VisionBackendConfig, VisionMode, extract_masks

from conftest import generate_case_fixtures, make_png, record_scripted
from pdftext import normalized_text
from tools.scripted_llm import ScriptedTransport, SUB_REPORT_TEXTS

GOLDENS = Path(__file__).parent / "goldens"


def report_pass(line: str) -> None:
    print(f"[PASS] {line}")


# --- criterion: grade mapping --------------------------------------------------


def test_grade_mapping_exhaustive_sweep():
    def oracle(p: float) -> DiagnosticGrade:
        if p < 0.2:
            return DiagnosticGrade.NO_GLAUCOMA
        if 0.2 <= p < 0.5:
            return DiagnosticGrade.POSSIBLE_GLAUCOMA
        if 0.5 <= p < 0.9:
            return DiagnosticGrade.LIKELY_GLAUCOMA
        return DiagnosticGrade.GLAUCOMA_DETECTED

    started = time.monotonic()
    for i in range(10_001):
        p = i / 10_000
        assert grade(p) is oracle(p), f"branch mismatch at p={p}"
    elapsed = time.monotonic() - started

    assert grade(0.2) is DiagnosticGrade.POSSIBLE_GLAUCOMA
    assert grade(0.5) is DiagnosticGrade.LIKELY_GLAUCOMA
    assert grade(0.9) is DiagnosticGrade.GLAUCOMA_DETECTED
    assert elapsed < 1.0, f"sweep took {elapsed:.3f}s"
    report_pass(
        f"grade mapping: 10,001-point sweep branch-exact, boundaries upper, {elapsed:.3f}s"
    )


# --- criterion: CDR oracle equivalence ------------------------------------------


def test_cdr_oracle_equivalence_on_random_maps():
    rng = np.random.default_rng(20240612)
    started = time.monotonic()
    checked = 0
    for _ in range(1000):
        width = int(rng.integers(1, 513))
        height = int(rng.integers(1, 513))
        labels = rng.integers(0, 3, size=width * height, dtype=np.uint8).tobytes()
        if labels.count(CUP) + labels.count(DISC) == 0:
            labels = bytes([CUP]) + labels[1:]
        seg = SegmentationMap(width=width, height=height, labels=labels)

        cup, disc = extract_masks(seg)
        result = compute_cdr(cup, disc)

        # independent brute-force: count pixels straight off the label bytes,
        # apply the published square-root area-share formula
        oracle_cup = seg.labels.count(CUP)
        oracle_disc = seg.labels.count(DISC)
        oracle_ratio = math.sqrt(oracle_cup / (oracle_cup + oracle_disc))
        assert (cup, disc) == (oracle_cup, oracle_disc)
        assert result.ratio == pytest.approx(oracle_ratio, rel=1e-9)
        checked += 1
    elapsed = time.monotonic() - started

    assert compute_cdr(3844, 6156).display_string == "0.62"
    assert elapsed < 30.0, f"{checked} maps took {elapsed:.1f}s"
    report_pass(
        f"CDR: {checked} random maps match counting oracle at rel 1e-9, "
        f"(3844, 6156) displays 0.62, {elapsed:.1f}s"
    )


# --- criterion: template byte-exactness ------------------------------------------


def test_template_byte_exactness_against_goldens():
    cdr = compute_cdr(3844, 6156)
    core = build_core_prompt(DiagnosticGrade.GLAUCOMA_DETECTED, cdr, "IOP 28 mmHg OS")
    assert core.text == (GOLDENS / "core_with_note.txt").read_text()

    role_prompt = build_role_prompt(core, "pharmacist")
    assert role_prompt.text == (GOLDENS / "role_prompt_pharmacist.txt").read_text()
    assert "Do not mention Network A or B." in role_prompt.text

    sub_reports = [
        SubReport(role="ophthalmologist", text=(
            "Optic nerve head changes are consistent with advanced glaucomatous "
            "damage; recommend urgent pressure-lowering intervention."
        )),
        SubReport(role="optometrist", text=(
            "Visual field testing and repeat imaging are advised to establish "
            "progression."
        )),
        SubReport(role="pharmacist", text=(
            "Review current medications for steroid exposure and interactions "
            "before initiating topical therapy."
        )),
        SubReport(role="glaucoma specialist", text=(
            "Findings indicate severe disease; a staged treatment plan with "
            "close monitoring is warranted."
        )),
    ]
    director = build_director_prompt(sub_reports, has_note=True)
    assert director.text == (GOLDENS / "director_with_note.txt").read_text()
    assert (
        "Do not reference the sources of the information or mention any "
        "sub-reports." in director.text
    )
    report_pass("templates: core, role and director prompts byte-equal to goldens")


# --- criterion: orchestration properties -----------------------------------------


class _LatencyShuffle:
    """Scripted completions delayed by a seeded pseudo-random latency."""

    def __init__(self, seed: int):
        self._inner = ScriptedTransport()
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

    def complete(self, messages):
        with self._lock:
            delay = self._rng.uniform(0.0, 0.04)
        time.sleep(delay)
        return self._inner.complete(messages)


def test_orchestration_properties(tmp_path):
    core = build_core_prompt(
        DiagnosticGrade.GLAUCOMA_DETECTED, compute_cdr(3844, 6156), "IOP 28 mmHg OS"
    )
    rng = random.Random(97)
    trials = 0
    for seed in range(8):
        n_roles = rng.randint(1, 6)
        roles = RoleSet(
            roles=tuple(f"specialist {chr(97 + i)}" for i in range(n_roles))
        )
        reports = _generate_sub_reports(
            core, roles, _LatencyShuffle(seed), max_parallel=4
        )
        assert [r.role for r in reports] == list(roles.roles)
        director = build_director_prompt(reports, has_note=True)
        block_count = sum(
            1 for line in director.text.splitlines() if line.startswith("Report: ")
        )
        assert block_count == len(reports)
        trials += 1

    # withholding any single role fixture aborts the case, naming the role
    roles = RoleSet(roles=("ophthalmologist", "optometrist", "pharmacist"))
    for withheld in roles.roles:
        fixture_dir = tmp_path / f"withheld-{withheld.replace(' ', '-')}"
        for role in roles.roles:
            if role != withheld:
                prompt = build_role_prompt(core, role)
                record_scripted(fixture_dir, [{"role": "user", "content": prompt.text}])
        with pytest.raises(PartialAgentFailure) as err:
            generate_sub_reports(
                core,
                roles,
                LlmBackendConfig(mode=LlmMode.REPLAY, fixture_dir=fixture_dir),
            )
        assert err.value.failed_roles == [withheld]
    report_pass(
        f"orchestration: {trials} latency permutations kept role order, "
        "director block count matches, withheld fixtures abort loudly"
    )


# --- criterion: end-to-end determinism --------------------------------------------


def test_selfcheck_determinism_offline(no_network):
    started = time.monotonic()
    ok, lines, canonical = run_selfcheck()
    elapsed = time.monotonic() - started
    assert ok, "\n".join(lines)
    assert canonical == run_selfcheck()[2]
    assert elapsed < 10.0, f"selfcheck took {elapsed:.1f}s"
    report_pass(
        f"selfcheck: byte-identical across runs, matches golden, offline, {elapsed:.1f}s"
    )


# --- criterion: session isolation --------------------------------------------------


def test_session_isolation_under_concurrency(tmp_path):
    manager = SessionManager()
    core = build_core_prompt(
        DiagnosticGrade.GLAUCOMA_DETECTED, compute_cdr(3844, 6156), "IOP 28 mmHg OS"
    )
    sessions = []
    fixture_dir = tmp_path / "fixtures"
    backend = LlmBackendConfig(mode=LlmMode.REPLAY, fixture_dir=fixture_dir)

    for i in range(8):
        report = FinalReport(
            markdown=f"# Report for case {i}\n\nDetailed findings {i}.",
            generated_at=datetime.now(timezone.utc),
        )
        session = manager.open_session(f"case-{i}", report, core)
        exchanges = []
        history: list[dict] = []
        for j in range(2):
            question = f"Session {i} question {j}: what should happen next?"
            messages = (
                [{"role": "system", "content": session.seed.content}]
                + history
                + [{"role": "user", "content": question}]
            )
            answer = record_scripted(fixture_dir, messages)
            history += [
                {"role": "user", "content": question},
                {"role": "assistant", "content": answer},
            ]
            exchanges.append(question)
        sessions.append((session, exchanges))

    def run_exchanges(entry):
        session, questions = entry
        for question in questions:
            manager.chat(session.session_id, question, backend)

    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(run_exchanges, sessions))

    transcripts = [
        {m.content for m in manager.transcript(s.session_id)} for s, _ in sessions
    ]
    for i in range(8):
        assert len(manager.transcript(sessions[i][0].session_id)) == 4  # 2 per exchange
        for j in range(i + 1, 8):
            assert transcripts[i].isdisjoint(transcripts[j]), f"{i} vs {j} overlap"

    # a failed exchange leaves history exactly as before
    session = sessions[0][0]
    before = manager.transcript(session.session_id)
    with pytest.raises(FixtureMiss):
        manager.chat(session.session_id, "Unrecorded question?", backend)
    assert manager.transcript(session.session_id) == before
    report_pass(
        "sessions: 8 concurrent sessions disjoint, +2 per exchange, failures atomic"
    )


# --- criterion: PDF bundle -----------------------------------------------------------


def test_pdf_bundle_text_extraction(tmp_path):
    vision = VisionBackendConfig(
        mode=VisionMode.STUB,
        stub_probability=0.95,
        stub_disc_radius=50,
        stub_cup_radius=31,
    )
    note = "Acceptance case note"
    questions = [
        "What does a cup-to-disc ratio of 0.62 mean?",
        "What follow-up testing do you recommend?",
    ]
    fixture_dir = tmp_path / "fixtures"
    generate_case_fixtures(
        fixture_dir,
        image=selfcheck_image(),
        note=note,
        vision_config=vision,
        questions=questions,
    )
    config = ServiceConfig(
        vision=vision,
        llm=LlmBackendConfig(mode=LlmMode.REPLAY, fixture_dir=fixture_dir),
    )
    client = TestClient(create_app(config))

    upload = client.post(
        "/api/cases",
        files={"image": ("case.png", make_png(200, 200), "image/png")},
        data={"note": note},
    )
    case_id = upload.json()["case_id"]
    payload = client.post(f"/api/cases/{case_id}/report").json()
    answers = []
    for question in questions:
        reply = client.post(
            f"/api/sessions/{payload['session_id']}/chat", json={"question": question}
        )
        assert reply.status_code == 200
        answers.append(reply.json()["answer"])

    pdf = client.get(f"/api/cases/{case_id}/pdf")
    assert pdf.status_code == 200
    text = normalized_text(pdf.content)

    assert "definitive signs of glaucoma detected" in text  # grade phrase
    assert "0.62" in text  # CDR display string
    for role in payload["roles"]:  # every role section text
        marker = SUB_REPORT_TEXTS[role][:60]
        assert marker in text, f"missing section for {role}"
    for question in questions:  # both chat exchanges
        assert question in text
    for answer in answers:
        assert answer[:60] in text
    report_pass(
        "pdf: extraction contains grade phrase, CDR display, all role sections, "
        "both exchanges"
    )
