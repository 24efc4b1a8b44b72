"""Report bundle assembly and PDF rendering.

The PDF is the self-contained case record: case metadata, the segmentation
overlay, the synthesized report rendered from Markdown, the specialist
sub-reports, and the follow-up transcript. Layout constants live in
pdf_layout.toml so rendering stays regression-testable by text extraction.
"""

from __future__ import annotations

import io
import re
import sys
from dataclasses import dataclass
from datetime import datetime
from importlib import resources
from xml.sax.saxutils import escape

from PIL import Image as PILImage
from reportlab.lib.pagesizes import A4, letter
from reportlab.lib.styles import ParagraphStyle
from reportlab.platypus import Image, Paragraph, SimpleDocTemplate, Spacer

from .analysis import OverlayImage
from .chat import ChatMessage
from .orchestration import SubReport

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class ReportBundle:
    """Everything the downloadable record contains for one case."""

    case_id: str
    created_at: datetime
    grade_label: str
    grade_phrase: str
    cdr_display: str
    note: str | None
    overlay: OverlayImage
    report_markdown: str
    sub_reports: list[SubReport]
    transcript: list[ChatMessage]  # may be empty


def load_layout() -> dict:
    data = resources.files("medchat").joinpath("pdf_layout.toml").read_bytes()
    return tomllib.loads(data.decode("utf-8"))


def encode_overlay_png(overlay: OverlayImage) -> bytes:
    im = PILImage.frombytes("RGB", (overlay.width, overlay.height), overlay.pixel_data)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


_BOLD = re.compile(r"\*\*(.+?)\*\*")


def _inline(text: str) -> str:
    """Escape for reportlab's mini-XML, keeping **bold** spans."""
    escaped = escape(text)
    return _BOLD.sub(r"<b>\1</b>", escaped)


def _markdown_flowables(markdown: str, styles: dict) -> list:
    """Line-based Markdown rendering: #/##/### headings, - bullets,
    paragraphs separated by blank lines."""
    flowables: list = []
    paragraph: list[str] = []

    def flush() -> None:
        if paragraph:
            flowables.append(Paragraph(_inline(" ".join(paragraph)), styles["body"]))
            flowables.append(Spacer(1, 6))
            paragraph.clear()

    for raw in markdown.splitlines():
        line = raw.strip()
        if not line:
            flush()
        elif line.startswith("### "):
            flush()
            flowables.append(Paragraph(_inline(line[4:]), styles["subheading"]))
            flowables.append(Spacer(1, 4))
        elif line.startswith("## "):
            flush()
            flowables.append(Paragraph(_inline(line[3:]), styles["heading"]))
            flowables.append(Spacer(1, 6))
        elif line.startswith("# "):
            flush()
            flowables.append(Paragraph(_inline(line[2:]), styles["heading"]))
            flowables.append(Spacer(1, 6))
        elif line.startswith(("- ", "* ")):
            flush()
            flowables.append(
                Paragraph("• " + _inline(line[2:]), styles["body"])
            )
            flowables.append(Spacer(1, 3))
        else:
            paragraph.append(line)
    flush()
    return flowables


def render_pdf(bundle: ReportBundle) -> bytes:
    """Render the bundle to PDF bytes per the pinned layout."""
    layout = load_layout()
    page = letter if layout["page"] == "letter" else A4
    buf = io.BytesIO()
    doc = SimpleDocTemplate(
        buf,
        pagesize=page,
        leftMargin=layout["margin_left"],
        rightMargin=layout["margin_right"],
        topMargin=layout["margin_top"],
        bottomMargin=layout["margin_bottom"],
        title=layout["title"],
    )
    styles = {
        "title": ParagraphStyle(
            "title", fontName=layout["font_bold"], fontSize=layout["size_title"],
            leading=layout["size_title"] + 4,
        ),
        "heading": ParagraphStyle(
            "heading", fontName=layout["font_bold"], fontSize=layout["size_heading"],
            leading=layout["size_heading"] + 3,
        ),
        "subheading": ParagraphStyle(
            "subheading", fontName=layout["font_bold"],
            fontSize=layout["size_subheading"], leading=layout["size_subheading"] + 3,
        ),
        "body": ParagraphStyle(
            "body", fontName=layout["font_body"], fontSize=layout["size_body"],
            leading=layout["leading_body"],
        ),
    }

    sections = {
        "metadata": _metadata_section,
        "overlay": _overlay_section,
        "report": _report_section,
        "sub_reports": _sub_reports_section,
        "transcript": _transcript_section,
    }
    story: list = []
    for name in layout["section_order"]:
        story.extend(sections[name](bundle, layout, styles))
    doc.build(story)
    return buf.getvalue()


def _metadata_section(bundle: ReportBundle, layout: dict, styles: dict) -> list:
    note = bundle.note if bundle.note else layout["no_note"]
    lines = [
        f"Case: {bundle.case_id}",
        f"Created: {bundle.created_at.strftime('%Y-%m-%d %H:%M UTC')}",
        f"Diagnostic grade: {bundle.grade_phrase}",
        f"Cup-to-disc ratio: {bundle.cdr_display}",
        f"Clinician's notes: {note}",
    ]
    flowables = [Paragraph(_inline(layout["title"]), styles["title"]), Spacer(1, 14)]
    for line in lines:
        flowables.append(Paragraph(_inline(line), styles["body"]))
        flowables.append(Spacer(1, 3))
    flowables.append(Spacer(1, 10))
    return flowables


def _overlay_section(bundle: ReportBundle, layout: dict, styles: dict) -> list:
    png = encode_overlay_png(bundle.overlay)
    scale = min(
        layout["overlay_max_width"] / bundle.overlay.width,
        layout["overlay_max_height"] / bundle.overlay.height,
        1.0,
    )
    image = Image(
        io.BytesIO(png),
        width=bundle.overlay.width * scale,
        height=bundle.overlay.height * scale,
    )
    image.hAlign = "LEFT"
    return [
        Paragraph(_inline(layout["heading_overlay"]), styles["heading"]),
        Spacer(1, 8),
        image,
        Spacer(1, 14),
    ]


def _report_section(bundle: ReportBundle, layout: dict, styles: dict) -> list:
    return [
        Paragraph(_inline(layout["heading_report"]), styles["heading"]),
        Spacer(1, 8),
        *_markdown_flowables(bundle.report_markdown, styles),
        Spacer(1, 8),
    ]


def _sub_reports_section(bundle: ReportBundle, layout: dict, styles: dict) -> list:
    flowables = [
        Paragraph(_inline(layout["heading_sub_reports"]), styles["heading"]),
        Spacer(1, 8),
    ]
    for report in bundle.sub_reports:
        flowables.append(Paragraph(_inline(report.role.title()), styles["subheading"]))
        flowables.append(Spacer(1, 4))
        flowables.extend(_markdown_flowables(report.text, styles))
        flowables.append(Spacer(1, 6))
    return flowables


def _transcript_section(bundle: ReportBundle, layout: dict, styles: dict) -> list:
    flowables = [
        Paragraph(_inline(layout["heading_transcript"]), styles["heading"]),
        Spacer(1, 8),
    ]
    if not bundle.transcript:
        flowables.append(Paragraph(_inline(layout["empty_transcript"]), styles["body"]))
        return flowables
    for msg in bundle.transcript:
        label = "Q" if msg.author.value == "USER" else "A"
        flowables.append(
            Paragraph(f"<b>{label}:</b> " + _inline(msg.content), styles["body"])
        )
        flowables.append(Spacer(1, 5))
    return flowables
