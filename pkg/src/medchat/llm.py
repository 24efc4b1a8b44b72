"""Chat-completions transports: live HTTP, deterministic replay, and record.

Every request is canonicalized to JSON with sorted keys and hashed; that
digest is the replay fixture key, so any change to model name, temperature
or prompt text misses loudly (FixtureMiss) instead of replaying stale text.

Fixture file format (one file per digest, `<digest>.fixture`):

    medchat-fixture 1
    digest: <sha256 hex>
    request-bytes: <N>
    <N bytes of canonical request JSON, UTF-8>
    response-bytes: <M>
    <M bytes of completion text, UTF-8>
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Protocol

import httpx

from ._retry import with_retries
from .errors import BackendUnreachable, ConfigError, FixtureMiss

Message = dict[str, str]  # {"role": ..., "content": ...}

_LLM_ATTEMPTS = 3
_LLM_BASE_DELAY = 0.25

DEFAULT_MODEL = "gpt-4.1"


class LlmMode(str, Enum):
    LIVE = "LIVE"
    REPLAY = "REPLAY"
    RECORD = "RECORD"


@dataclass(frozen=True)
class LlmBackendConfig:
    mode: LlmMode
    base_url: str | None = None
    api_key: str | None = None
    model_name: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_parallel_agents: int = 4
    request_timeout: float = 60.0
    fixture_dir: Path | None = None

    def __post_init__(self) -> None:
        if self.mode in (LlmMode.LIVE, LlmMode.RECORD):
            if not self.base_url or not self.api_key:
                raise ConfigError(f"{self.mode.value} mode requires base_url and api_key")
        if self.mode in (LlmMode.REPLAY, LlmMode.RECORD):
            if self.fixture_dir is None:
                raise ConfigError(f"{self.mode.value} mode requires fixture_dir")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_parallel_agents < 1:
            raise ConfigError("max_parallel_agents must be positive")
        if self.request_timeout <= 0:
            raise ConfigError("request_timeout must be positive")


def canonical_request(model: str, messages: list[Message], temperature: float) -> str:
    """Canonical JSON for one completion request; the digest input."""
    return json.dumps(
        {"model": model, "messages": messages, "temperature": temperature},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=True,
    )


def request_digest(canonical: str) -> str:
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class LlmTransport(Protocol):
    """One synchronous chat completion; implementations are thread-safe."""

    def complete(self, messages: list[Message]) -> str: ...


class HttpChatTransport:
    """POST {base_url}/v1/chat/completions with bearer auth; retries on
    connection failures and 5xx."""

    def __init__(
        self,
        base_url: str,
        api_key: str,
        model: str,
        temperature: float,
        timeout: float = 60.0,
    ):
        self._url = base_url.rstrip("/") + "/v1/chat/completions"
        self._api_key = api_key
        self.model = model
        self.temperature = temperature
        self._timeout = timeout

    def complete(self, messages: list[Message]) -> str:
        body = {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
        }

        def attempt() -> str:
            resp = httpx.post(
                self._url,
                json=body,
                headers={"Authorization": f"Bearer {self._api_key}"},
                timeout=self._timeout,
            )
            if resp.status_code >= 500:
                raise httpx.HTTPError(f"server error {resp.status_code}")
            if resp.status_code != 200:
                raise BackendUnreachable(
                    f"LLM backend returned {resp.status_code}: {resp.text[:200]}"
                )
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BackendUnreachable(f"malformed completion response: {exc}")

        try:
            return with_retries(
                attempt,
                attempts=_LLM_ATTEMPTS,
                base_delay=_LLM_BASE_DELAY,
                deadline=self._timeout,
                retryable=(httpx.HTTPError,),
            )
        except httpx.HTTPError as exc:
            raise BackendUnreachable(f"LLM backend unreachable at {self._url}: {exc}")


_MAGIC = b"medchat-fixture 1\n"


class FixtureStore:
    """Digest-keyed completions on disk, in the documented plain-text format."""

    def __init__(self, directory: Path):
        self.directory = Path(directory)

    def path_for(self, digest: str) -> Path:
        return self.directory / f"{digest}.fixture"

    def write(self, canonical: str, completion: str) -> Path:
        digest = request_digest(canonical)
        request_bytes = canonical.encode("utf-8")
        response_bytes = completion.encode("utf-8")
        payload = b"".join(
            [
                _MAGIC,
                f"digest: {digest}\n".encode(),
                f"request-bytes: {len(request_bytes)}\n".encode(),
                request_bytes,
                b"\n",
                f"response-bytes: {len(response_bytes)}\n".encode(),
                response_bytes,
                b"\n",
            ]
        )
        self.directory.mkdir(parents=True, exist_ok=True)
        path = self.path_for(digest)
        path.write_bytes(payload)
        return path

    def read(self, digest: str, hint: str = "") -> str:
        path = self.path_for(digest)
        if not path.is_file():
            raise FixtureMiss(digest, hint)
        canonical, completion = self.parse(path.read_bytes())
        stored = request_digest(canonical)
        if stored != digest:
            raise FixtureMiss(digest, f"fixture file {path.name} is corrupt")
        return completion

    @staticmethod
    def parse(data: bytes) -> tuple[str, str]:
        """(canonical request JSON, completion text) from one fixture file."""
        buf = io.BytesIO(data)
        if buf.readline() != _MAGIC:
            raise ValueError("not a medchat fixture file")
        digest_line = buf.readline().decode()
        if not digest_line.startswith("digest: "):
            raise ValueError("missing digest header")

        def read_block(header: str) -> bytes:
            line = buf.readline().decode()
            if not line.startswith(header + ": "):
                raise ValueError(f"missing {header} header")
            length = int(line[len(header) + 2 :])
            block = buf.read(length)
            if len(block) != length or buf.read(1) != b"\n":
                raise ValueError(f"truncated {header} block")
            return block

        request = read_block("request-bytes").decode("utf-8")
        response = read_block("response-bytes").decode("utf-8")
        return request, response


class ReplayTransport:
    """Serve recorded completions; never touches the network."""

    def __init__(self, store: FixtureStore, model: str, temperature: float):
        self._store = store
        self.model = model
        self.temperature = temperature

    def complete(self, messages: list[Message]) -> str:
        canonical = canonical_request(self.model, messages, self.temperature)
        head = messages[-1]["content"][:60] if messages else ""
        return self._store.read(request_digest(canonical), hint=f"prompt head: {head!r}")


class RecordTransport:
    """Pass through to an inner transport and persist each completion."""

    def __init__(
        self, inner: LlmTransport, store: FixtureStore, model: str, temperature: float
    ):
        self._inner = inner
        self._store = store
        self.model = model
        self.temperature = temperature

    def complete(self, messages: list[Message]) -> str:
        completion = self._inner.complete(messages)
        canonical = canonical_request(self.model, messages, self.temperature)
        self._store.write(canonical, completion)
        return completion


def build_transport(config: LlmBackendConfig) -> LlmTransport:
    """Transport for a validated config."""
    if config.mode is LlmMode.REPLAY:
        assert config.fixture_dir is not None
        return ReplayTransport(
            FixtureStore(config.fixture_dir), config.model_name, config.temperature
        )
    assert config.base_url is not None and config.api_key is not None
    live = HttpChatTransport(
        base_url=config.base_url,
        api_key=config.api_key,
        model=config.model_name,
        temperature=config.temperature,
        timeout=config.request_timeout,
    )
    if config.mode is LlmMode.LIVE:
        return live
    assert config.fixture_dir is not None
    return RecordTransport(
        live, FixtureStore(config.fixture_dir), config.model_name, config.temperature
    )
