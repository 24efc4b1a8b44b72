"""Fundus image to multi-specialist diagnostic report, with follow-up chat.

Pipeline: vision adapters produce a glaucoma probability and a disc/cup
segmentation; those are verbalized into a shared evidence prompt; specialist
role agents analyze it independently; a director agent synthesizes the final
report. A REST gateway adds case storage, sessioned chat and PDF export.
"""

from .analysis import CdrResult, DiagnosticGrade, compute_cdr, grade, render_overlay
from .llm import LlmBackendConfig, LlmMode
from .orchestration import (
    FinalReport,
    PipelineResult,
    RoleSet,
    SubReport,
    discover_roles,
    generate_sub_reports,
    run_pipeline,
    synthesize_report,
)
from .prompts import (
    CorePrompt,
    DirectorPrompt,
    RolePrompt,
    build_core_prompt,
    build_director_prompt,
    build_role_prompt,
)
from .vision import (
    ClassifierOutput,
    FundusImage,
    SegmentationMap,
    VisionBackendConfig,
    VisionMode,
    classify,
    extract_masks,
    segment,
)

__version__ = "0.1.0"

__all__ = [
    "CdrResult",
    "ClassifierOutput",
    "CorePrompt",
    "DiagnosticGrade",
    "DirectorPrompt",
    "FinalReport",
    "FundusImage",
    "LlmBackendConfig",
    "LlmMode",
    "PipelineResult",
    "RolePrompt",
    "RoleSet",
    "SegmentationMap",
    "SubReport",
    "VisionBackendConfig",
    "VisionMode",
    "build_core_prompt",
    "build_director_prompt",
    "build_role_prompt",
    "classify",
    "compute_cdr",
    "discover_roles",
    "extract_masks",
    "generate_sub_reports",
    "grade",
    "render_overlay",
    "run_pipeline",
    "segment",
    "synthesize_report",
]
