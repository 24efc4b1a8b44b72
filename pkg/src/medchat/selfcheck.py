"""Offline end-to-end determinism check (stub vision + packaged fixtures).

Runs the full pipeline twice on a synthetic case and compares the canonical
result serializations with each other and with the committed golden file.
CI-suitable: no network, exit status via the CLI.
"""

from __future__ import annotations

import io
from importlib import resources
from pathlib import Path

import numpy as np
from PIL import Image

from .config import packaged_fixture_dir
from .llm import LlmBackendConfig, LlmMode
from .orchestration import run_pipeline
from .vision import FundusImage, VisionBackendConfig, VisionMode

SELFCHECK_NOTE = (
    "Intraocular pressure 24 mmHg in the right eye; positive family history "
    "of glaucoma"
)
SELFCHECK_PROBABILITY = 0.95
SELFCHECK_DISC_RADIUS = 50
SELFCHECK_CUP_RADIUS = 31
SELFCHECK_SIZE = 200


def selfcheck_image() -> FundusImage:
    """Deterministic 200x200 synthetic fundus-like raster."""
    size = SELFCHECK_SIZE
    ys = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    xs = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    dist = np.sqrt(ys[:, None] ** 2 + xs[None, :] ** 2)
    # Warm radial falloff, brighter toward the center.
    shade = np.clip(1.0 - dist / size, 0.0, 1.0)
    rgb = np.stack(
        [
            (80 + 140 * shade).astype(np.uint8),
            (40 + 70 * shade).astype(np.uint8),
            (20 + 30 * shade).astype(np.uint8),
        ],
        axis=-1,
    )
    im = Image.fromarray(rgb, mode="RGB")
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return FundusImage.from_bytes(buf.getvalue())


def selfcheck_vision_config() -> VisionBackendConfig:
    return VisionBackendConfig(
        mode=VisionMode.STUB,
        stub_probability=SELFCHECK_PROBABILITY,
        stub_disc_radius=SELFCHECK_DISC_RADIUS,
        stub_cup_radius=SELFCHECK_CUP_RADIUS,
    )


def selfcheck_llm_config(fixture_dir: Path | None = None) -> LlmBackendConfig:
    return LlmBackendConfig(
        mode=LlmMode.REPLAY,
        fixture_dir=fixture_dir if fixture_dir is not None else packaged_fixture_dir(),
    )


def golden_json() -> str:
    return (
        resources.files("medchat")
        .joinpath("selfcheck_assets", "golden.json")
        .read_text(encoding="utf-8")
    )


def run_selfcheck(fixture_dir: Path | None = None) -> tuple[bool, list[str], str]:
    """(all_passed, per-step report lines, canonical serialization)."""
    image = selfcheck_image()
    vision_config = selfcheck_vision_config()
    llm_config = selfcheck_llm_config(fixture_dir)

    first = run_pipeline(image, SELFCHECK_NOTE, vision_config, llm_config).canonical_json()
    second = run_pipeline(image, SELFCHECK_NOTE, vision_config, llm_config).canonical_json()

    lines = []
    ok = True

    repeat_ok = first == second
    ok &= repeat_ok
    lines.append(f"[{'ok' if repeat_ok else 'FAIL'}] two runs byte-identical")

    golden_ok = first == golden_json()
    ok &= golden_ok
    lines.append(f"[{'ok' if golden_ok else 'FAIL'}] matches committed golden result")

    return ok, lines, first
