"""Diagnostic grade, cup-to-disc ratio and segmentation overlay.

Pure functions over the vision outputs; everything here is deterministic
and safe for unrestricted concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import IntEnum

import numpy as np

from .errors import DimensionMismatch, NoDiscDetected, OutOfRange
from .vision import CUP, DISC, FundusImage, SegmentationMap


class DiagnosticGrade(IntEnum):
    """Four verbal grades discretizing the classifier probability.

    Ordered: NO_GLAUCOMA < POSSIBLE_GLAUCOMA < LIKELY_GLAUCOMA < GLAUCOMA_DETECTED.
    """

    NO_GLAUCOMA = 0
    POSSIBLE_GLAUCOMA = 1
    LIKELY_GLAUCOMA = 2
    GLAUCOMA_DETECTED = 3

    @property
    def label(self) -> str:
        """Short clinical label, as surfaced in the API and case metadata."""
        return _GRADE_LABELS[self]


_GRADE_LABELS = {
    DiagnosticGrade.NO_GLAUCOMA: "no glaucoma",
    DiagnosticGrade.POSSIBLE_GLAUCOMA: "possible glaucoma",
    DiagnosticGrade.LIKELY_GLAUCOMA: "likely glaucoma",
    DiagnosticGrade.GLAUCOMA_DETECTED: "glaucoma detected",
}

# Lower-inclusive probability thresholds: [0, .2) -> NO, [.2, .5) -> POSSIBLE,
# [.5, .9) -> LIKELY, [.9, 1] -> DETECTED.
GRADE_THRESHOLDS = (0.2, 0.5, 0.9)


def grade(probability: float) -> DiagnosticGrade:
    """Map a glaucoma probability in [0, 1] to its diagnostic grade."""
    if not 0.0 <= probability <= 1.0:
        raise OutOfRange(f"probability {probability} outside [0, 1]")
    if probability < GRADE_THRESHOLDS[0]:
        return DiagnosticGrade.NO_GLAUCOMA
    if probability < GRADE_THRESHOLDS[1]:
        return DiagnosticGrade.POSSIBLE_GLAUCOMA
    if probability < GRADE_THRESHOLDS[2]:
        return DiagnosticGrade.LIKELY_GLAUCOMA
    return DiagnosticGrade.GLAUCOMA_DETECTED


@dataclass(frozen=True)
class CdrResult:
    """Cup-to-disc ratio: sqrt of the cup share of the total disc area."""

    ratio: float
    cup_pixels: int
    disc_pixels: int
    display_string: str  # ratio rounded half-up to 2 decimals


def compute_cdr(cup_pixels: int, disc_pixels: int) -> CdrResult:
    """CDR from mask pixel counts; the disc count excludes the cup region.

    Raises NoDiscDetected when both counts are zero (the segmentor found no
    optic structures; callers surface this rather than fabricate a ratio).
    """
    if cup_pixels < 0 or disc_pixels < 0:
        raise ValueError("pixel counts must be non-negative")
    total = cup_pixels + disc_pixels
    if total == 0:
        raise NoDiscDetected("segmentation contains no cup or disc pixels")
    ratio = math.sqrt(cup_pixels / total)
    display = str(Decimal(ratio).quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))
    return CdrResult(
        ratio=ratio,
        cup_pixels=cup_pixels,
        disc_pixels=disc_pixels,
        display_string=display,
    )


@dataclass(frozen=True)
class OverlayImage:
    """The fundus raster with translucent disc/cup tinting."""

    width: int
    height: int
    pixel_data: bytes  # RGB, row-major


# Tint colors and opacity for the overlay; pinned so goldens are byte-exact.
DISC_TINT = (0, 255, 0)
CUP_TINT = (255, 0, 0)
TINT_OPACITY = 0.35


def render_overlay(image: FundusImage, seg: SegmentationMap) -> OverlayImage:
    """Alpha-blend the disc (green) and cup (red) regions onto the image.

    Background pixels pass through untouched. The blend is computed in exact
    integer arithmetic, (65*src + 35*tint + 50) // 100, i.e. round-half-up of
    0.65*src + 0.35*tint per channel, so outputs are platform-exact.
    """
    if (seg.width, seg.height) != (image.width, image.height):
        raise DimensionMismatch(
            f"segmentation map {seg.width}x{seg.height} "
            f"does not match image {image.width}x{image.height}"
        )
    src = image.pixels().astype(np.uint32)
    labels = seg.label_array()
    out = src.copy()
    for label, tint in ((DISC, DISC_TINT), (CUP, CUP_TINT)):
        mask = labels == label
        if not mask.any():
            continue
        tint_arr = np.array(tint, dtype=np.uint32)
        out[mask] = (65 * src[mask] + 35 * tint_arr + 50) // 100
    return OverlayImage(
        width=image.width,
        height=image.height,
        pixel_data=out.astype(np.uint8).tobytes(),
    )
