"""Vision backends: glaucoma probability and optic disc/cup segmentation.

Three interchangeable adapters produce the same two artifacts for a fundus
image, so the rest of the pipeline never depends on a specific ML runtime:

* REMOTE_INFERENCE posts the original image bytes to an HTTP model server.
* PRECOMPUTED_FILES reads sidecar files keyed by the image content digest.
* STUB paints deterministic concentric circles (offline testing).
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import httpx
import numpy as np
from PIL import Image

from ._retry import with_retries
from .errors import BackendUnreachable, ConfigError, DimensionMismatch, MissingSidecar

# Segmentation label values, also the palette indices of the interchange PNGs.
BACKGROUND = 0
DISC = 1
CUP = 2

_REMOTE_ATTEMPTS = 3
_REMOTE_BASE_DELAY = 0.25
_REMOTE_DEADLINE = 30.0


class VisionMode(str, Enum):
    REMOTE_INFERENCE = "REMOTE_INFERENCE"
    PRECOMPUTED_FILES = "PRECOMPUTED_FILES"
    STUB = "STUB"


@dataclass(frozen=True)
class FundusImage:
    """A decoded RGB fundus photograph.

    `encoded_bytes` keeps the original file content: remote backends receive
    the bytes untouched (a JPEG re-encode would not be byte-stable) and the
    precomputed adapter derives its sidecar key from them.
    """

    width: int
    height: int
    pixel_data: bytes  # RGB, row-major, width*height*3
    source_format: str  # "PNG" | "JPEG"
    encoded_bytes: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1x1")
        if len(self.pixel_data) != self.width * self.height * 3:
            raise ValueError("pixel data length does not match dimensions")
        if self.source_format not in ("PNG", "JPEG"):
            raise ValueError(f"unsupported source format {self.source_format!r}")

    @classmethod
    def from_bytes(cls, data: bytes) -> "FundusImage":
        """Decode raw PNG/JPEG file bytes; raises ValueError otherwise."""
        try:
            with Image.open(io.BytesIO(data)) as im:
                fmt = im.format
                if fmt not in ("PNG", "JPEG"):
                    raise ValueError(f"unsupported image format {fmt!r}")
                rgb = im.convert("RGB")
                return cls(
                    width=rgb.width,
                    height=rgb.height,
                    pixel_data=rgb.tobytes(),
                    source_format=fmt,
                    encoded_bytes=data,
                )
        except ValueError:
            raise
        except Exception as exc:
            raise ValueError(f"not a decodable PNG/JPEG image: {exc}") from exc

    def content_key(self) -> str:
        """Stable case key: first 16 hex chars of SHA-256 of the file bytes."""
        return hashlib.sha256(self.encoded_bytes).hexdigest()[:16]

    def pixels(self) -> np.ndarray:
        """(height, width, 3) uint8 view of the raster."""
        return np.frombuffer(self.pixel_data, dtype=np.uint8).reshape(
            self.height, self.width, 3
        )


@dataclass(frozen=True)
class ClassifierOutput:
    probability: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")


@dataclass(frozen=True)
class SegmentationMap:
    """Per-pixel labels over the source image grid, one byte per pixel."""

    width: int
    height: int
    labels: bytes  # row-major, values in {BACKGROUND, DISC, CUP}

    def __post_init__(self) -> None:
        if len(self.labels) != self.width * self.height:
            raise ValueError("label buffer length does not match dimensions")
        if not set(self.labels) <= {BACKGROUND, DISC, CUP}:
            raise ValueError("segmentation labels outside {0, 1, 2}")

    def label_array(self) -> np.ndarray:
        return np.frombuffer(self.labels, dtype=np.uint8).reshape(
            self.height, self.width
        )


@dataclass(frozen=True)
class VisionBackendConfig:
    mode: VisionMode
    endpoint_url: str | None = None
    stub_probability: float | None = None
    stub_disc_radius: int | None = None
    stub_cup_radius: int | None = None
    sidecar_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.mode is VisionMode.REMOTE_INFERENCE:
            if not self.endpoint_url:
                raise ConfigError("REMOTE_INFERENCE requires endpoint_url")
        elif self.mode is VisionMode.PRECOMPUTED_FILES:
            if self.sidecar_dir is None:
                raise ConfigError("PRECOMPUTED_FILES requires sidecar_dir")
        elif self.mode is VisionMode.STUB:
            if (
                self.stub_probability is None
                or self.stub_disc_radius is None
                or self.stub_cup_radius is None
            ):
                raise ConfigError(
                    "STUB requires stub_probability, stub_disc_radius and stub_cup_radius"
                )
            if not 0.0 <= self.stub_probability <= 1.0:
                raise ConfigError("stub_probability outside [0, 1]")
            if self.stub_disc_radius < 0 or self.stub_cup_radius < 0:
                raise ConfigError("stub radii must be non-negative")
            if self.stub_cup_radius > self.stub_disc_radius:
                raise ConfigError("stub cup_radius must not exceed disc_radius")


def classify(image: FundusImage, config: VisionBackendConfig) -> ClassifierOutput:
    """Glaucoma likelihood for one fundus image, via the configured adapter."""
    if config.mode is VisionMode.STUB:
        assert config.stub_probability is not None
        return ClassifierOutput(probability=config.stub_probability)
    if config.mode is VisionMode.PRECOMPUTED_FILES:
        assert config.sidecar_dir is not None
        path = config.sidecar_dir / f"{image.content_key()}.prob.txt"
        if not path.is_file():
            raise MissingSidecar(f"no probability sidecar at {path}")
        try:
            value = float(path.read_text().strip())
        except ValueError as exc:
            raise MissingSidecar(f"unreadable probability sidecar {path}: {exc}")
        return ClassifierOutput(probability=value)
    body = _remote_post(config, "/classify", image)
    try:
        value = float(json.loads(body)["probability"])
    except (ValueError, KeyError, TypeError) as exc:
        raise BackendUnreachable(f"malformed classifier response: {exc}")
    return ClassifierOutput(probability=value)


def segment(image: FundusImage, config: VisionBackendConfig) -> SegmentationMap:
    """Per-pixel disc/cup/background labels for one fundus image."""
    if config.mode is VisionMode.STUB:
        assert config.stub_disc_radius is not None
        assert config.stub_cup_radius is not None
        return _stub_segmentation(
            image.width, image.height, config.stub_disc_radius, config.stub_cup_radius
        )
    if config.mode is VisionMode.PRECOMPUTED_FILES:
        assert config.sidecar_dir is not None
        path = config.sidecar_dir / f"{image.content_key()}.seg.png"
        if not path.is_file():
            raise MissingSidecar(f"no segmentation sidecar at {path}")
        seg = decode_map_png(path.read_bytes())
        _check_dimensions(seg, image)
        return seg
    body = _remote_post(config, "/segment", image)
    seg = decode_map_png(body)
    _check_dimensions(seg, image)
    return seg


def extract_masks(seg: SegmentationMap) -> tuple[int, int]:
    """(cup_pixel_count, disc_pixel_count) from a segmentation map."""
    counts = np.bincount(seg.label_array().ravel(), minlength=3)
    return int(counts[CUP]), int(counts[DISC])


def _check_dimensions(seg: SegmentationMap, image: FundusImage) -> None:
    if (seg.width, seg.height) != (image.width, image.height):
        raise DimensionMismatch(
            f"segmentation map {seg.width}x{seg.height} "
            f"does not match image {image.width}x{image.height}"
        )


def _stub_segmentation(
    width: int, height: int, disc_radius: int, cup_radius: int
) -> SegmentationMap:
    # Concentric filled circles about the raster center ((w-1)/2, (h-1)/2);
    # a pixel is inside a circle iff its center distance is strictly < radius.
    ys = np.arange(height, dtype=np.float64) - (height - 1) / 2.0
    xs = np.arange(width, dtype=np.float64) - (width - 1) / 2.0
    dist_sq = ys[:, None] ** 2 + xs[None, :] ** 2
    labels = np.full((height, width), BACKGROUND, dtype=np.uint8)
    labels[dist_sq < float(disc_radius) ** 2] = DISC
    labels[dist_sq < float(cup_radius) ** 2] = CUP
    return SegmentationMap(width=width, height=height, labels=labels.tobytes())


def encode_map_png(seg: SegmentationMap) -> bytes:
    """Serialize a map as an indexed-color PNG with palette indices 0/1/2."""
    im = Image.frombytes("P", (seg.width, seg.height), seg.labels)
    # Black background, green disc, red cup; consumers read indices, not colors.
    palette = [0, 0, 0, 0, 255, 0, 255, 0, 0] + [0, 0, 0] * 253
    im.putpalette(palette)
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def decode_map_png(data: bytes) -> SegmentationMap:
    """Parse an indexed-color PNG back into a SegmentationMap."""
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format != "PNG" or im.mode != "P":
                raise ValueError(f"expected an indexed PNG, got {im.format}/{im.mode}")
            return SegmentationMap(
                width=im.width, height=im.height, labels=im.tobytes()
            )
    except ValueError:
        raise
    except Exception as exc:
        raise ValueError(f"undecodable segmentation PNG: {exc}") from exc


def _remote_post(config: VisionBackendConfig, route: str, image: FundusImage) -> bytes:
    assert config.endpoint_url is not None
    url = config.endpoint_url.rstrip("/") + route
    content_type = "image/png" if image.source_format == "PNG" else "image/jpeg"

    def attempt() -> bytes:
        resp = httpx.post(
            url,
            content=image.encoded_bytes,
            headers={"Content-Type": content_type},
            timeout=_REMOTE_DEADLINE,
        )
        if resp.status_code >= 500:
            raise httpx.HTTPError(f"server error {resp.status_code}")
        if resp.status_code != 200:
            raise BackendUnreachable(
                f"vision backend returned {resp.status_code} for {route}"
            )
        return resp.content

    try:
        return with_retries(
            attempt,
            attempts=_REMOTE_ATTEMPTS,
            base_delay=_REMOTE_BASE_DELAY,
            deadline=_REMOTE_DEADLINE,
            retryable=(httpx.HTTPError,),
        )
    except httpx.HTTPError as exc:
        raise BackendUnreachable(f"vision backend unreachable at {url}: {exc}")
