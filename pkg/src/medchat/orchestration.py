"""Multi-agent engine: role discovery, parallel role agents, director synthesis.

Fan-out runs one completion per role with a bounded worker pool and returns
results in role order regardless of completion order; any failed role aborts
the case (PartialAgentFailure) so the director never synthesizes from a
silently reduced panel.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone

from . import vision
from .analysis import CdrResult, DiagnosticGrade, OverlayImage, compute_cdr, grade, render_overlay
from .errors import EmptyCompletion, PartialAgentFailure, PipelineStageError
from .llm import LlmBackendConfig, LlmTransport, build_transport
from .prompts import CorePrompt, DirectorPrompt, build_core_prompt, build_director_prompt, build_role_discovery_prompt, build_role_prompt
from .vision import FundusImage, SegmentationMap, VisionBackendConfig

# Served when role discovery succeeds but yields nothing parseable.
FALLBACK_ROLES = ("ophthalmologist", "optometrist", "pharmacist", "glaucoma specialist")

MAX_ROLES = 6

# A role line, once markers are stripped and case folded: letters, spaces,
# hyphens; anything else (prose, headers, empty lines) is not a role.
_ROLE_PATTERN = re.compile(r"^[a-z][a-z \-]{0,63}$")
_LIST_MARKER = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s*")


@dataclass(frozen=True)
class RoleSet:
    """Ordered, distinct, lowercase specialist role names (1 to 6)."""

    roles: tuple[str, ...]
    fallback_used: bool = False

    def __post_init__(self) -> None:
        if not 1 <= len(self.roles) <= MAX_ROLES:
            raise ValueError(f"role count {len(self.roles)} outside [1, {MAX_ROLES}]")
        normalized = [r.strip().casefold() for r in self.roles]
        if any(not r for r in normalized):
            raise ValueError("role names must be non-empty")
        if len(set(normalized)) != len(normalized):
            raise ValueError("role names must be distinct")


@dataclass(frozen=True)
class SubReport:
    role: str
    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("sub-report text must be non-empty")


@dataclass(frozen=True)
class FinalReport:
    markdown: str
    generated_at: datetime


def parse_roles(completion: str) -> list[str]:
    """Role names from a one-per-line completion: strip list markers, trim,
    lowercase, dedupe, cap at MAX_ROLES. Unparseable lines are dropped."""
    seen: list[str] = []
    for raw_line in completion.splitlines():
        line = _LIST_MARKER.sub("", raw_line).strip().lower()
        if not _ROLE_PATTERN.match(line):
            continue
        if line not in seen:
            seen.append(line)
        if len(seen) == MAX_ROLES:
            break
    return seen


def discover_roles(core: CorePrompt, backend: LlmBackendConfig) -> RoleSet:
    """Ask the model which specialist roles fit this case.

    Parse failures fall back to the standard four-role panel with
    fallback_used set; transport errors propagate.
    """
    transport = build_transport(backend)
    return _discover_roles(core, transport)


def _discover_roles(core: CorePrompt, transport: LlmTransport) -> RoleSet:
    completion = transport.complete(
        [{"role": "user", "content": build_role_discovery_prompt(core)}]
    )
    roles = parse_roles(completion)
    if not roles:
        return RoleSet(roles=FALLBACK_ROLES, fallback_used=True)
    return RoleSet(roles=tuple(roles))


def generate_sub_reports(
    core: CorePrompt, roles: RoleSet, backend: LlmBackendConfig
) -> list[SubReport]:
    """One completion per role, at most max_parallel_agents in flight.

    Output order is RoleSet order regardless of completion order. If any
    role's call fails (after transport retries), the whole case fails with
    PartialAgentFailure naming every failed role.
    """
    transport = build_transport(backend)
    return _generate_sub_reports(core, roles, transport, backend.max_parallel_agents)


def _generate_sub_reports(
    core: CorePrompt, roles: RoleSet, transport: LlmTransport, max_parallel: int
) -> list[SubReport]:
    def run_agent(role: str) -> SubReport:
        prompt = build_role_prompt(core, role)
        text = transport.complete([{"role": "user", "content": prompt.text}])
        if not text.strip():
            raise EmptyCompletion(f"blank sub-report for role {role!r}")
        return SubReport(role=role, text=text)

    results: dict[str, SubReport] = {}
    failed: list[str] = []
    with ThreadPoolExecutor(max_workers=max_parallel) as pool:
        futures = {role: pool.submit(run_agent, role) for role in roles.roles}
        for role, future in futures.items():
            try:
                results[role] = future.result()
            except Exception:
                failed.append(role)
    if failed:
        raise PartialAgentFailure(failed)
    return [results[role] for role in roles.roles]


def synthesize_report(
    director: DirectorPrompt, backend: LlmBackendConfig
) -> FinalReport:
    """Single director completion, returned as timestamped Markdown."""
    transport = build_transport(backend)
    return _synthesize_report(director, transport)


def _synthesize_report(director: DirectorPrompt, transport: LlmTransport) -> FinalReport:
    markdown = transport.complete([{"role": "user", "content": director.text}])
    if not markdown.strip():
        raise EmptyCompletion("director returned a blank report")
    return FinalReport(markdown=markdown, generated_at=datetime.now(timezone.utc))


@dataclass(frozen=True)
class PipelineResult:
    """Everything one case run produces, prompt evidence through overlay."""

    probability: float
    grade: DiagnosticGrade
    cdr: CdrResult
    core_prompt: CorePrompt
    roles: RoleSet
    sub_reports: list[SubReport]
    final_report: FinalReport
    overlay: OverlayImage

    def canonical_json(self) -> str:
        """Deterministic serialization for replay/selfcheck comparison.

        Excludes wall-clock fields and stores the overlay as a SHA-256 of its
        raw RGB bytes: in replay mode this JSON is a pure function of
        (image bytes, note, configs).
        """
        return json.dumps(
            {
                "probability": self.probability,
                "grade": self.grade.label,
                "cdr": {
                    "ratio": self.cdr.ratio,
                    "cup_pixels": self.cdr.cup_pixels,
                    "disc_pixels": self.cdr.disc_pixels,
                    "display": self.cdr.display_string,
                },
                "core_prompt": self.core_prompt.text,
                "roles": list(self.roles.roles),
                "fallback_used": self.roles.fallback_used,
                "sub_reports": [
                    {"role": r.role, "text": r.text} for r in self.sub_reports
                ],
                "final_report": self.final_report.markdown,
                "overlay_rgb_sha256": hashlib.sha256(
                    self.overlay.pixel_data
                ).hexdigest(),
                "overlay_size": [self.overlay.width, self.overlay.height],
            },
            sort_keys=True,
            indent=2,
            ensure_ascii=True,
        )


def run_pipeline(
    image: FundusImage,
    note: str | None,
    vision_config: VisionBackendConfig,
    llm_config: LlmBackendConfig,
    deadline_s: float | None = 120.0,
) -> PipelineResult:
    """Execute the whole case pipeline in dependency order.

    classify and segment run concurrently; every stage failure is re-raised
    as PipelineStageError carrying the stage name.
    """
    started = time.monotonic()

    def check_deadline(stage: str) -> None:
        if deadline_s is not None and time.monotonic() - started > deadline_s:
            raise PipelineStageError(
                stage, TimeoutError(f"pipeline exceeded {deadline_s}s deadline")
            )

    def stage(name: str, fn, *args):
        check_deadline(name)
        try:
            return fn(*args)
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(name, exc) from exc

    with ThreadPoolExecutor(max_workers=2) as pool:
        classify_future = pool.submit(vision.classify, image, vision_config)
        segment_future = pool.submit(vision.segment, image, vision_config)
        classifier_out = stage("classify", classify_future.result)
        seg_map: SegmentationMap = stage("segment", segment_future.result)

    cup_pixels, disc_pixels = stage("extract_masks", vision.extract_masks, seg_map)
    cdr = stage("compute_cdr", compute_cdr, cup_pixels, disc_pixels)
    case_grade = stage("grade", grade, classifier_out.probability)
    core = stage("build_core_prompt", build_core_prompt, case_grade, cdr, note)

    transport = build_transport(llm_config)
    roles = stage("discover_roles", _discover_roles, core, transport)
    sub_reports = stage(
        "generate_sub_reports",
        _generate_sub_reports,
        core,
        roles,
        transport,
        llm_config.max_parallel_agents,
    )
    director = stage(
        "build_director_prompt", build_director_prompt, sub_reports, core.has_note
    )
    final_report = stage("synthesize_report", _synthesize_report, director, transport)
    overlay = stage("render_overlay", render_overlay, image, seg_map)

    return PipelineResult(
        probability=classifier_out.probability,
        grade=case_grade,
        cdr=cdr,
        core_prompt=core,
        roles=roles,
        sub_reports=sub_reports,
        final_report=final_report,
        overlay=overlay,
    )
