"""Pluggable text-completion gateway with transcript record/replay."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import requests

from .errors import BackendUnavailable, RateLimited, ReplayMiss

log = logging.getLogger(__name__)

ENV_ENDPOINT = "SYNC_LLM_ENDPOINT"
ENV_API_KEY = "SYNC_LLM_API_KEY"
ENV_MODEL = "SYNC_LLM_MODEL"

DEFAULT_PIPELINE_TEMPERATURE = 0.0
DEFAULT_EVAL_TEMPERATURE = 0.2
DEFAULT_MAX_TOKENS = 2048
DEFAULT_IN_FLIGHT = 4


@dataclass(frozen=True)
class CompletionRequest:
    """One prompt for one model; tag labels the pipeline stage for the transcript."""

    prompt: str
    model_id: str
    temperature: float = DEFAULT_PIPELINE_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.prompt:
            raise ValueError("prompt is empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature out of range: {self.temperature}")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")


def request_digest(request: CompletionRequest, attempt: int = 0) -> str:
    """Stable content hash of (model_id, prompt, temperature, attempt)."""
    payload = json.dumps(
        {
            "model_id": request.model_id,
            "prompt": request.prompt,
            "temperature": request.temperature,
            "attempt": attempt,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Backend(Protocol):
    def complete(self, request: CompletionRequest, attempt: int) -> str: ...


class HttpBackend:
    """Generic chat-completion client; endpoint and key come from configuration.

    Transient failures (connection errors, 429, 5xx) are retried with capped
    exponential backoff.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str = "",
        *,
        attempts: int = 3,
        backoff_s: float = 1.0,
        backoff_cap_s: float = 8.0,
        timeout_s: float = 60.0,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint
        self.api_key = api_key
        self.attempts = attempts
        self.backoff_s = backoff_s
        self.backoff_cap_s = backoff_cap_s
        self.timeout_s = timeout_s
        self.session = session or requests.Session()

    def complete(self, request: CompletionRequest, attempt: int) -> str:
        body = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception | None = None
        rate_limited = False
        for retry in range(self.attempts):
            if retry:
                log.warning("retrying completion (%d/%d): %s", retry, self.attempts, last_error)
                time.sleep(min(self.backoff_s * 2 ** (retry - 1), self.backoff_cap_s))
            try:
                response = self.session.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if response.status_code == 429:
                rate_limited = True
                last_error = RateLimited("HTTP 429")
                continue
            if response.status_code >= 500:
                last_error = BackendUnavailable(f"HTTP {response.status_code}")
                continue
            if response.status_code != 200:
                raise BackendUnavailable(f"HTTP {response.status_code}: {response.text[:200]}")
            data = response.json()
            return data["choices"][0]["message"]["content"]
        if rate_limited:
            raise RateLimited(f"rate limited after {self.attempts} attempts")
        raise BackendUnavailable(f"no response after {self.attempts} attempts: {last_error}")


class ReplayBackend:
    """Serves recorded responses by request digest; misses are hard errors."""

    def __init__(self, transcript_path: str | Path) -> None:
        self.responses = load_transcript(transcript_path)

    def complete(self, request: CompletionRequest, attempt: int) -> str:
        digest = request_digest(request, attempt)
        try:
            return self.responses[digest]
        except KeyError:
            raise ReplayMiss(
                f"no recorded response for digest {digest} (tag={request.tag!r})"
            ) from None


def load_transcript(path: str | Path) -> dict[str, str]:
    """Digest -> response map from a line-delimited transcript; last write wins."""
    responses: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            responses[record["digest"]] = record["response"]
    return responses


class Gateway:
    """Front door for completions: concurrency cap plus optional recording.

    Appends one JSON line per completion to the transcript when recording;
    appends are serialized, so concurrent complete() calls are safe.
    """

    def __init__(
        self,
        backend: Backend,
        *,
        record_path: str | Path | None = None,
        in_flight: int = DEFAULT_IN_FLIGHT,
    ) -> None:
        self.backend = backend
        self.record_path = Path(record_path) if record_path else None
        self._slots = threading.Semaphore(in_flight)
        self._write_lock = threading.Lock()

    def complete(self, request: CompletionRequest, attempt: int = 0) -> str:
        with self._slots:
            started = time.monotonic()
            response = self.backend.complete(request, attempt)
            latency_ms = int((time.monotonic() - started) * 1000)
        if self.record_path is not None:
            self._record(request, attempt, response, latency_ms)
        return response

    def vote_runs(self, request: CompletionRequest, n: int) -> list[str]:
        """n independent completions; the attempt index keeps their digests distinct."""
        if n < 1:
            raise ValueError("vote runs require n >= 1")
        return [self.complete(request, attempt=i) for i in range(n)]

    def _record(self, request: CompletionRequest, attempt: int, response: str, latency_ms: int) -> None:
        record = {
            "digest": request_digest(request, attempt),
            "request": {
                "model_id": request.model_id,
                "prompt": request.prompt,
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
                "tag": request.tag,
                "attempt": attempt,
            },
            "response": response,
            "timestamp": time.time(),
            "latency_ms": latency_ms,
        }
        line = json.dumps(record, sort_keys=True, ensure_ascii=False)
        with self._write_lock:
            self.record_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.record_path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
