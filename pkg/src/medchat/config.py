"""Service configuration: TOML file, environment overrides, safe defaults.

Environment variables override file values: MEDCHAT_LLM_BASE_URL,
MEDCHAT_LLM_API_KEY, MEDCHAT_MODEL, MEDCHAT_VISION_MODE, MEDCHAT_LISTEN.
With no config file at all the service runs fully offline (STUB vision plus
the packaged replay fixtures), which is the demo/selfcheck posture.
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError
from .llm import LlmBackendConfig, LlmMode
from .vision import VisionBackendConfig, VisionMode

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_LISTEN = "127.0.0.1:8000"
DEFAULT_MAX_UPLOAD = 10 * 1024 * 1024  # 10 MiB
DEFAULT_SESSION_TTL = 24 * 3600.0
DEFAULT_REQUEST_DEADLINE = 120.0


def packaged_fixture_dir() -> Path:
    """The replay fixtures shipped inside the package (selfcheck set)."""
    return Path(str(resources.files("medchat").joinpath("selfcheck_assets", "fixtures")))


@dataclass(frozen=True)
class ServiceConfig:
    listen_host: str = "127.0.0.1"
    listen_port: int = 8000
    vision: VisionBackendConfig = field(
        default_factory=lambda: VisionBackendConfig(
            mode=VisionMode.STUB,
            stub_probability=0.95,
            stub_disc_radius=50,
            stub_cup_radius=31,
        )
    )
    llm: LlmBackendConfig = field(
        default_factory=lambda: LlmBackendConfig(
            mode=LlmMode.REPLAY, fixture_dir=packaged_fixture_dir()
        )
    )
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD
    session_ttl_s: float = DEFAULT_SESSION_TTL
    request_deadline_s: float = DEFAULT_REQUEST_DEADLINE
    persistence_path: Path | None = None
    static_dir: Path | None = None


def _parse_listen(listen: str) -> tuple[str, int]:
    host, sep, port = listen.rpartition(":")
    if not sep or not host:
        raise ConfigError(f"listen address {listen!r} must be host:port")
    try:
        return host, int(port)
    except ValueError:
        raise ConfigError(f"listen port {port!r} is not an integer")


# Demo stub geometry (also the selfcheck case): p=0.95, disc 50 px, cup 31 px.
_STUB_DEFAULTS = {"stub_probability": 0.95, "stub_disc_radius": 50, "stub_cup_radius": 31}


def _vision_from_table(table: Mapping[str, Any]) -> VisionBackendConfig:
    try:
        mode = VisionMode(table.get("mode", "STUB"))
    except ValueError:
        raise ConfigError(f"unknown vision mode {table.get('mode')!r}")
    sidecar = table.get("sidecar_dir")
    stub = dict(_STUB_DEFAULTS) if mode is VisionMode.STUB else {}
    stub.update({k: table[k] for k in _STUB_DEFAULTS if k in table})
    return VisionBackendConfig(
        mode=mode,
        endpoint_url=table.get("endpoint_url"),
        stub_probability=stub.get("stub_probability"),
        stub_disc_radius=stub.get("stub_disc_radius"),
        stub_cup_radius=stub.get("stub_cup_radius"),
        sidecar_dir=Path(sidecar) if sidecar else None,
    )


def _llm_from_table(table: Mapping[str, Any]) -> LlmBackendConfig:
    try:
        mode = LlmMode(table.get("mode", "REPLAY"))
    except ValueError:
        raise ConfigError(f"unknown llm mode {table.get('mode')!r}")
    fixture_dir = table.get("fixture_dir")
    if fixture_dir is None and mode in (LlmMode.REPLAY, LlmMode.RECORD):
        fixture_path: Path | None = packaged_fixture_dir()
    else:
        fixture_path = Path(fixture_dir) if fixture_dir else None
    return LlmBackendConfig(
        mode=mode,
        base_url=table.get("base_url"),
        api_key=table.get("api_key"),
        model_name=table.get("model_name", "gpt-4.1"),
        temperature=float(table.get("temperature", 0.0)),
        max_parallel_agents=int(table.get("max_parallel_agents", 4)),
        request_timeout=float(table.get("request_timeout", 60.0)),
        fixture_dir=fixture_path,
    )


def load_service_config(
    path: Path | None = None, env: Mapping[str, str] | None = None
) -> ServiceConfig:
    """Build the validated config from an optional TOML file plus env."""
    env = os.environ if env is None else env
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config file {path}: {exc}")

    vision_table = dict(raw.get("vision", {}))
    llm_table = dict(raw.get("llm", {}))

    if "MEDCHAT_VISION_MODE" in env:
        vision_table["mode"] = env["MEDCHAT_VISION_MODE"]
    if "MEDCHAT_LLM_BASE_URL" in env:
        llm_table["base_url"] = env["MEDCHAT_LLM_BASE_URL"]
    if "MEDCHAT_LLM_API_KEY" in env:
        llm_table["api_key"] = env["MEDCHAT_LLM_API_KEY"]
    if "MEDCHAT_MODEL" in env:
        llm_table["model_name"] = env["MEDCHAT_MODEL"]

    listen = env.get("MEDCHAT_LISTEN", raw.get("listen", DEFAULT_LISTEN))
    host, port = _parse_listen(listen)

    persistence = raw.get("persistence_path")
    static_dir = raw.get("static_dir")
    try:
        return ServiceConfig(
            listen_host=host,
            listen_port=port,
            vision=_vision_from_table(vision_table),
            llm=_llm_from_table(llm_table),
            max_upload_bytes=int(raw.get("max_upload_bytes", DEFAULT_MAX_UPLOAD)),
            session_ttl_s=float(raw.get("session_ttl_seconds", DEFAULT_SESSION_TTL)),
            request_deadline_s=float(
                raw.get("request_deadline_seconds", DEFAULT_REQUEST_DEADLINE)
            ),
            persistence_path=Path(persistence) if persistence else None,
            static_dir=Path(static_dir) if static_dir else None,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}")
