"""Chat-completion boundary: an HTTP client for hosted models and a scripted mock."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping

import httpx

from .errors import AuthError, LlmTimeoutError, ProtocolError, RateLimited

log = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-4o"
DEFAULT_ENDPOINT = "https://api.openai.com/v1/chat/completions"
DEFAULT_KEY_ENV = "CBI_LLM_API_KEY"

# USD per isolation call, used only for cost reporting
PRICE_PER_CALL = {
    "gpt-4o": 0.075,
    "deepseek-v3": 0.0045,
    "deepseek-chat": 0.0045,
    "deepseek-r1": 0.009,
    "deepseek-reasoner": 0.009,
}


def digest(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatRequest:
    user: str
    model_id: str = DEFAULT_MODEL
    system: str | None = None
    temperature: float = 0.0
    max_output_chars: int | None = None

    def __post_init__(self):
        if not self.user:
            raise ValueError("chat request needs a non-empty user message")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")

    def messages(self) -> list[dict]:
        msgs = []
        if self.system:
            msgs.append({"role": "system", "content": self.system})
        msgs.append({"role": "user", "content": self.user})
        return msgs


@dataclass
class ClientConfig:
    endpoint_url: str = DEFAULT_ENDPOINT
    api_key_env: str = DEFAULT_KEY_ENV
    timeout: float = 120.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff: float = 1.0
    prices: Mapping[str, float] = field(default_factory=lambda: dict(PRICE_PER_CALL))

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


class UsageRecord:
    """Thread-safe running totals of wire attempts and estimated spend."""

    def __init__(self):
        self._lock = threading.Lock()
        self.request_count = 0
        self.total_cost_estimate = 0.0

    def add(self, requests: int = 1, cost: float = 0.0) -> None:
        with self._lock:
            self.request_count += requests
            self.total_cost_estimate += cost


class _Transcript:
    def __init__(self, path: Path | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()

    def write(self, record: dict) -> None:
        if self.path is None:
            return
        with self._lock, open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


class ChatClient:
    """Client for an OpenAI-style ``/chat/completions`` endpoint."""

    def __init__(self, config: ClientConfig | None = None, *, transport: httpx.BaseTransport | None = None,
                 transcript: Path | None = None, sleep: Callable[[float], None] = time.sleep):
        self.config = config or ClientConfig()
        self.usage = UsageRecord()
        self._slots = threading.BoundedSemaphore(self.config.max_in_flight)
        self._http = httpx.Client(timeout=self.config.timeout, transport=transport)
        self._transcript = _Transcript(transcript)
        self._sleep = sleep

    def api_key(self) -> str:
        key = os.environ.get(self.config.api_key_env, "").strip()
        if not key:
            raise AuthError(f"environment variable {self.config.api_key_env} is not set")
        return key

    def complete(self, request: ChatRequest) -> str:
        key = self.api_key()
        payload = {"model": request.model_id, "messages": request.messages(), "temperature": request.temperature}
        attempt = 0
        while True:
            try:
                with self._slots:
                    text = self._send(key, payload)
            except (LlmTimeoutError, RateLimited, ProtocolError) as exc:
                transient = not isinstance(exc, ProtocolError) or exc.transient
                if not transient or attempt >= self.config.max_retries:
                    self._transcript.write({"model": request.model_id, "digest": digest(request.user),
                                            "error": str(exc)})
                    raise
                delay = self.config.backoff * (2 ** attempt)
                log.warning("chat request failed (%s); retry %d in %.1fs", exc, attempt + 1, delay)
                self._sleep(delay)
                attempt += 1
                continue
            if request.max_output_chars is not None:
                text = text[: request.max_output_chars]
            self.usage.add(0, self.config.prices.get(request.model_id, 0.0))
            self._transcript.write({"model": request.model_id, "digest": digest(request.user),
                                    "prompt": request.user, "response": text})
            return text

    def _send(self, key: str, payload: dict) -> str:
        self.usage.add(1)
        try:
            resp = self._http.post(self.config.endpoint_url, json=payload,
                                   headers={"Authorization": f"Bearer {key}"})
        except httpx.TimeoutException as exc:
            raise LlmTimeoutError(f"request timed out after {self.config.timeout}s") from exc
        except httpx.TransportError as exc:
            raise ProtocolError(f"transport failure: {exc}", status=599) from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"provider rejected the API key (HTTP {resp.status_code})")
        if resp.status_code == 429:
            raise RateLimited("provider rate limit (HTTP 429)")
        if resp.status_code >= 400:
            raise ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}", status=resp.status_code)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"malformed completion response: {exc}") from exc
        if not isinstance(content, str):
            raise ProtocolError("completion content is not a string")
        return content

    def close(self) -> None:
        self._http.close()


class MockClient:
    """Scripted stand-in keyed on the SHA-256 digest of the user prompt.

    Never touches the network.  Records call counts and the peak number of
    concurrent calls so callers can check in-flight limits.
    """

    def __init__(self, script: Mapping[str, str] | None = None, *, max_in_flight: int = 4,
                 delay: float = 0.0, transcript: Path | None = None):
        self.script = dict(script or {})
        self.usage = UsageRecord()
        self.calls = 0
        self.prompts: list[str] = []
        self.peak_in_flight = 0
        self._in_flight = 0
        self._lock = threading.Lock()
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._delay = delay
        self._transcript = _Transcript(transcript)

    @classmethod
    def from_file(cls, path: Path, **kwargs) -> MockClient:
        doc = json.loads(Path(path).read_text())
        if not isinstance(doc, dict) or not all(isinstance(v, str) for v in doc.values()):
            raise ValueError(f"{path}: mock script must map prompt digests to response strings")
        return cls(doc, **kwargs)

    def complete(self, request: ChatRequest) -> str:
        with self._slots:
            with self._lock:
                self.calls += 1
                self.prompts.append(request.user)
                self._in_flight += 1
                self.peak_in_flight = max(self.peak_in_flight, self._in_flight)
            try:
                if self._delay:
                    time.sleep(self._delay)
                self.usage.add(1)
                key = digest(request.user)
                if key not in self.script:
                    self._transcript.write({"model": request.model_id, "digest": key, "error": "no scripted response"})
                    raise ProtocolError(f"no scripted response for prompt digest {key[:12]}")
                text = self.script[key]
                self._transcript.write({"model": request.model_id, "digest": key,
                                        "prompt": request.user, "response": text})
                return text
            finally:
                with self._lock:
                    self._in_flight -= 1
