"""Byte-exact construction of the three prompt families.

All builders are deterministic pure functions: equal inputs yield identical
bytes. The verbatim text blocks live under templates/ (see manifest.toml);
whitespace contract: single space between sentences of the core prompt, one
blank line before each instruction or report block.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import TYPE_CHECKING, Sequence

from .analysis import CdrResult, DiagnosticGrade
from .errors import EmptyNote, EmptyRole, NoSubReports

if TYPE_CHECKING:
    from .orchestration import SubReport

# Phrase inserted after "Network A suggests"; keyed by grade.
GRADE_PHRASES = {
    DiagnosticGrade.NO_GLAUCOMA: "no signs of glaucoma",
    DiagnosticGrade.POSSIBLE_GLAUCOMA: "possible signs of glaucoma",
    DiagnosticGrade.LIKELY_GLAUCOMA: "likely signs of glaucoma",
    DiagnosticGrade.GLAUCOMA_DETECTED: "definitive signs of glaucoma detected",
}

_cache: dict[str, str] = {}


def template(name: str) -> str:
    """Load a verbatim template block by file stem, cached."""
    if name not in _cache:
        path = resources.files("medchat").joinpath("templates", f"{name}.txt")
        # A single trailing newline, if an editor added one, is not part of
        # the block.
        _cache[name] = path.read_text(encoding="utf-8").removesuffix("\n")
    return _cache[name]


@dataclass(frozen=True)
class CorePrompt:
    """The shared natural-language evidence string fed to every agent."""

    text: str
    grade: DiagnosticGrade
    cdr_display: str
    has_note: bool


@dataclass(frozen=True)
class RolePrompt:
    role: str
    text: str


@dataclass(frozen=True)
class DirectorPrompt:
    text: str
    report_count: int
    has_note: bool


def build_core_prompt(
    grade: DiagnosticGrade, cdr: CdrResult, note: str | None = None
) -> CorePrompt:
    """Verbalize grade and CDR, appending the clinical note when present.

    A present-but-blank note raises EmptyNote rather than emitting a dangling
    notes clause. Notes are inserted verbatim, trimmed only.
    """
    text = template("core_prompt").format(
        grade_phrase=GRADE_PHRASES[grade], cdr_display=cdr.display_string
    )
    has_note = note is not None
    if note is not None:
        trimmed = note.strip()
        if not trimmed:
            raise EmptyNote("clinical note is blank after trimming")
        text += " " + template("core_note_suffix").format(note=trimmed)
    return CorePrompt(
        text=text, grade=grade, cdr_display=cdr.display_string, has_note=has_note
    )


def build_role_prompt(core: CorePrompt, role: str) -> RolePrompt:
    """Core prompt plus the role-scoping instruction block."""
    if not role or not role.strip():
        raise EmptyRole("role name is empty")
    text = core.text + "\n\n" + template("role_instructions").format(role=role)
    return RolePrompt(role=role, text=text)


def build_director_prompt(
    sub_reports: Sequence["SubReport"], has_note: bool
) -> DirectorPrompt:
    """Preamble, one "Report:" block per sub-report in order, then the
    synthesis instructions. Sub-report sources are never named."""
    if not sub_reports:
        raise NoSubReports("director prompt needs at least one sub-report")
    preamble = template(
        "director_preamble_with_note" if has_note else "director_preamble_no_note"
    )
    blocks = [f"Report: {report.text}" for report in sub_reports]
    text = "\n\n".join([preamble, *blocks, template("director_closing")])
    return DirectorPrompt(text=text, report_count=len(sub_reports), has_note=has_note)


def build_role_discovery_prompt(core: CorePrompt) -> str:
    """Meta-prompt asking the model to propose specialist roles."""
    return template("role_discovery").format(context=core.text)
