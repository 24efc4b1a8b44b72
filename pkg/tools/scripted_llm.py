"""Deterministic canned completions for fixture generation and tests.

Maps any chat-completion request to a stable, clinically plausible text by
inspecting the prompt. Used as the inner source when recording the shipped
replay fixtures and as the response body of the local stub LLM server in
tests; production code never imports this.
"""

from __future__ import annotations

import re

STANDARD_ROLES = ("ophthalmologist", "optometrist", "pharmacist", "glaucoma specialist")

ROLE_DISCOVERY_COMPLETION = "\n".join(STANDARD_ROLES)

SUB_REPORT_TEXTS = {
    "ophthalmologist": (
        "Funduscopic review shows pronounced optic nerve head cupping with a "
        "cup-to-disc ratio of approximately 0.62, consistent with established "
        "glaucomatous damage. Neuroretinal rim thinning is expected to follow the "
        "ISNT-rule violation pattern. Recommend gonioscopy to classify the angle, "
        "baseline standard automated perimetry, and evaluation for topical "
        "pressure-lowering therapy; incisional or laser options should be "
        "discussed if progression is documented."
    ),
    "optometrist": (
        "The imaging findings warrant a comprehensive follow-up examination "
        "including applanation tonometry, pachymetry, and threshold visual field "
        "testing. Serial optic disc photography or OCT of the retinal nerve fiber "
        "layer every four to six months would establish a progression baseline. "
        "Patient education on adherence to follow-up intervals is essential."
    ),
    "pharmacist": (
        "Should topical therapy be initiated, a prostaglandin analog such as "
        "latanoprost 0.005% nightly is the usual first-line agent; counsel on "
        "conjunctival hyperemia and iris pigmentation. Review systemic medications "
        "for agents that can raise intraocular pressure, notably corticosteroids "
        "and anticholinergics, and verify no contraindications to beta-blocker "
        "adjuncts such as asthma or bradycardia."
    ),
    "glaucoma specialist": (
        "The reported probability and the cup-to-disc ratio of 0.62 indicate "
        "moderate to advanced glaucomatous optic neuropathy until proven "
        "otherwise. Staging requires correlation of structural metrics with "
        "functional loss on 24-2 perimetry. Target intraocular pressure should be "
        "set at least 25 percent below baseline, with escalation from topical "
        "monotherapy to combination therapy, selective laser trabeculoplasty, or "
        "filtration surgery guided by documented progression."
    ),
}

FINAL_REPORT_MARKDOWN = """# Comprehensive Diagnostic Report

## Summary of Findings

Automated analysis of the fundus photograph indicates definitive signs of glaucoma detected, with an estimated optic cup-to-disc ratio of approximately 0.62. The degree of cupping is consistent with established glaucomatous optic neuropathy of at least moderate severity.

## Diagnostic Reasoning

An enlarged cup-to-disc ratio reflects loss of neuroretinal rim tissue, the structural hallmark of glaucoma. Taken together with the screening assessment and the provided clinical context, the findings support a working diagnosis of open-angle glaucoma pending confirmatory examination.

## Recommendations

- Gonioscopy to classify the anterior chamber angle.
- Baseline and serial threshold visual field testing (24-2 strategy).
- OCT of the retinal nerve fiber layer every four to six months.
- Initiation of a topical prostaglandin analog with a target pressure at least 25 percent below baseline, after review of systemic medications and contraindications.
- Ophthalmology follow-up within one month, sooner if symptoms progress.

## Disposition

The patient should be informed that the findings indicate glaucomatous damage requiring prompt confirmatory workup and treatment initiation. This report is intended for clinical correlation and does not replace in-person examination.
"""

CHAT_QA = {
    "What does a cup-to-disc ratio of 0.62 mean?": (
        "A cup-to-disc ratio of 0.62 means the central depression of the optic "
        "nerve head occupies a majority share of the disc area. Ratios above "
        "roughly 0.5 raise concern for glaucomatous loss of neuroretinal rim "
        "tissue, so this value supports the report's diagnosis and the "
        "recommendation for confirmatory visual field testing."
    ),
    "What follow-up testing do you recommend?": (
        "The report recommends gonioscopy, baseline threshold visual field "
        "testing, and OCT of the retinal nerve fiber layer, repeated every four "
        "to six months to document stability or progression. Tonometry and "
        "pachymetry at the follow-up visit complete the baseline."
    ),
}

_ROLE_RE = re.compile(r"\n\nAs a (.+?), please analyze")


def scripted_completion(messages: list[dict]) -> str:
    """Deterministic completion for one request's message list."""
    prompt = messages[-1]["content"]
    if messages[0]["role"] == "system":
        question = prompt.strip()
        if question in CHAT_QA:
            return CHAT_QA[question]
        return (
            "Based on the diagnostic report for this case, the answer to your "
            f'question "{question}" is that the findings indicate glaucomatous '
            "optic neuropathy; please discuss specifics at the follow-up visit."
        )
    if prompt.startswith("Given the following diagnostic context"):
        return ROLE_DISCOVERY_COMPLETION
    match = _ROLE_RE.search(prompt)
    if match:
        role = match.group(1)
        if role in SUB_REPORT_TEXTS:
            return SUB_REPORT_TEXTS[role]
        return (
            f"From the perspective of a {role}, the automated findings warrant "
            "structured follow-up within this specialty's scope, with attention "
            "to the reported cup-to-disc ratio and screening grade."
        )
    if prompt.startswith("The following are diagnostic reports"):
        return FINAL_REPORT_MARKDOWN
    return "Acknowledged."


class ScriptedTransport:
    """In-process transport over scripted_completion (tests/fixture gen)."""

    def complete(self, messages: list[dict]) -> str:
        return scripted_completion(messages)
