"""Build the replay fixture set and golden result for the offline selfcheck.

Pipes the scripted completion source through the real RECORD transport so
the files on disk are exactly what `record-fixtures` would produce against a
live backend, then replays the whole pipeline to write the golden
serialization. Run from the repo root:

    python tools/generate_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO_ROOT / "src"))
sys.path.insert(0, str(REPO_ROOT))

from medchat.analysis import compute_cdr, grade
from medchat.llm import DEFAULT_MODEL, FixtureStore, LlmTransport, RecordTransport
from medchat.orchestration import (
    _discover_roles,
    _generate_sub_reports,
    _synthesize_report,
    run_pipeline,
)
from medchat.prompts import build_core_prompt, build_director_prompt
from medchat.selfcheck import (
    SELFCHECK_NOTE,
    run_selfcheck,
    selfcheck_image,
    selfcheck_llm_config,
    selfcheck_vision_config,
)
from medchat.vision import FundusImage, VisionBackendConfig, classify, extract_masks, segment
from tools.scripted_llm import CHAT_QA, ScriptedTransport


def generate_case_fixtures(
    fixture_dir: Path,
    *,
    image: FundusImage,
    note: str | None,
    vision_config: VisionBackendConfig,
    questions: list[str] | None = None,
    inner: LlmTransport | None = None,
    model: str = DEFAULT_MODEL,
    temperature: float = 0.0,
) -> None:
    """Record every completion the pipeline (and optional chat turns) will
    request for one case, using the scripted source by default."""
    store = FixtureStore(fixture_dir)
    transport = RecordTransport(inner or ScriptedTransport(), store, model, temperature)

    classifier_out = classify(image, vision_config)
    cup, disc = extract_masks(segment(image, vision_config))
    cdr = compute_cdr(cup, disc)
    core = build_core_prompt(grade(classifier_out.probability), cdr, note)

    roles = _discover_roles(core, transport)
    sub_reports = _generate_sub_reports(core, roles, transport, max_parallel=1)
    director = build_director_prompt(sub_reports, has_note=core.has_note)
    final = _synthesize_report(director, transport)

    # Chat turns replay the same message-list shape the session manager sends:
    # system seed, then alternating user/assistant history, then the question.
    seed = core.text + "\n\n" + final.markdown
    messages: list[dict] = [{"role": "system", "content": seed}]
    for question in questions or []:
        messages.append({"role": "user", "content": question})
        answer = transport.complete(messages)
        messages.append({"role": "assistant", "content": answer})


def main() -> None:
    package_dir = REPO_ROOT / "src" / "medchat" / "selfcheck_assets"
    fixture_dir = package_dir / "fixtures"
    fixture_dir.mkdir(parents=True, exist_ok=True)
    for stale in fixture_dir.glob("*.fixture"):
        stale.unlink()

    generate_case_fixtures(
        fixture_dir,
        image=selfcheck_image(),
        note=SELFCHECK_NOTE,
        vision_config=selfcheck_vision_config(),
        questions=list(CHAT_QA),
    )

    # Golden comes from a replay run; bootstrap it before run_selfcheck can
    # compare against it.
    replay = selfcheck_llm_config(fixture_dir)
    first = run_pipeline(
        selfcheck_image(), SELFCHECK_NOTE, selfcheck_vision_config(), replay
    ).canonical_json()
    second = run_pipeline(
        selfcheck_image(), SELFCHECK_NOTE, selfcheck_vision_config(), replay
    ).canonical_json()
    if first != second:
        raise SystemExit("replay is not deterministic; aborting")
    (package_dir / "golden.json").write_text(first, encoding="utf-8")

    count = len(list(fixture_dir.glob("*.fixture")))
    print(f"wrote {count} fixtures and golden.json under {package_dir}")
    ok, lines, _ = run_selfcheck()
    for line in lines:
        print(line)
    raise SystemExit(0 if ok else 1)


if __name__ == "__main__":
    main()
