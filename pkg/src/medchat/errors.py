"""Exception hierarchy shared across the pipeline, stores and service."""

from __future__ import annotations


class MedChatError(Exception):
    """Base class for every error raised by this package."""


# --- vision backends ---------------------------------------------------------

class BackendUnreachable(MedChatError):
    """A remote backend (vision or LLM) failed after all retries."""


class MissingSidecar(MedChatError):
    """Precomputed-files mode found no sidecar file for this case."""


class DimensionMismatch(MedChatError):
    """A segmentation map's dimensions do not match its source image."""


# --- image analysis ----------------------------------------------------------

class OutOfRange(MedChatError):
    """A probability outside [0, 1] was passed to the grade mapping."""


class NoDiscDetected(MedChatError):
    """Segmentation found neither cup nor disc pixels; no ratio can be formed."""


# --- prompt factory ----------------------------------------------------------

class EmptyNote(MedChatError):
    """A clinical note was supplied but is blank after trimming."""


class EmptyRole(MedChatError):
    """A role name is empty."""


class NoSubReports(MedChatError):
    """The director prompt needs at least one sub-report."""


# --- llm transport / orchestration -------------------------------------------

class FixtureMiss(MedChatError):
    """Replay mode has no recorded completion for this request digest."""

    def __init__(self, digest: str, hint: str = ""):
        self.digest = digest
        detail = f"no fixture for request digest {digest}"
        if hint:
            detail += f" ({hint})"
        super().__init__(detail)


class EmptyCompletion(MedChatError):
    """The model returned a blank completion."""


class PartialAgentFailure(MedChatError):
    """One or more role agents failed; the case is aborted rather than
    synthesized from a subset."""

    def __init__(self, failed_roles: list[str]):
        self.failed_roles = list(failed_roles)
        super().__init__(f"role agents failed: {', '.join(self.failed_roles)}")


class PipelineStageError(MedChatError):
    """Wraps any stage failure with the name of the pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"pipeline stage '{stage}' failed: {cause}")


# --- sessions / cases --------------------------------------------------------

class CaseNotFound(MedChatError):
    """No case with this identifier."""


class ReportNotReady(MedChatError):
    """The case has no completed report yet."""


class SessionNotFound(MedChatError):
    """No chat session with this identifier (or it expired)."""


class EmptyQuestion(MedChatError):
    """A chat question is blank after trimming."""


# --- gateway -----------------------------------------------------------------

class UnsupportedImage(MedChatError):
    """Upload is not a decodable PNG or JPEG."""


class TooLarge(MedChatError):
    """Upload exceeds the configured size limit."""


class AlreadyProcessing(MedChatError):
    """A report run is already in flight (or finished) for this case."""


class ConfigError(MedChatError):
    """A configuration file or value failed validation."""
