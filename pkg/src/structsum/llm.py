"""Pluggable LLM completion backend.

Every model-dependent operation in the pipeline routes through LlmGateway,
which pairs a backend (remote HTTP or deterministic scripted replay) with a
per-step-tag call ledger.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol

import requests

logger = logging.getLogger(__name__)


class BackendError(RuntimeError):
    """Base class for completion backend failures."""


class BackendUnavailable(BackendError):
    """Transport failed after bounded retries, or the endpoint rejected us."""


class EmptyResponse(BackendError):
    """The backend returned no completions."""


class ScriptExhausted(BackendError):
    """The replay script has no entries left."""


class ScriptMismatch(BackendError):
    """The next replay script entry is for a different step tag."""


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    tag: str
    temperature: float = 0.0
    sample_count: int = 1
    max_tokens: int = 1024

    def __post_init__(self) -> None:
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class LlmResponse:
    samples: tuple[str, ...]
    backend_name: str


class CallLedger:
    """Thread-safe per-tag count of completed LLM calls."""

    def __init__(self) -> None:
        self._counts: Counter[str] = Counter()
        self._lock = threading.Lock()

    def record(self, tag: str) -> None:
        with self._lock:
            self._counts[tag] += 1

    def count(self, tag: str) -> int:
        with self._lock:
            return self._counts[tag]

    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)


class CompletionBackend(Protocol):
    name: str

    def complete(self, request: LlmRequest) -> list[str]: ...


class ReplayBackend:
    """Deterministic backend that answers calls from an ordered script.

    Each script entry is a (tag, samples) pair consumed in order; the tag of
    the incoming request must match the next entry or the call fails fast so
    tests model call order exactly.
    """

    name = "replay"

    def __init__(self, script: Iterable[tuple[str, list[str]]] | None = None) -> None:
        self._script: deque[tuple[str, tuple[str, ...]]] = deque()
        self._lock = threading.Lock()
        if script is not None:
            self.register(script)

    def register(self, script: Iterable[tuple[str, list[str]]]) -> None:
        with self._lock:
            for tag, samples in script:
                self._script.append((tag, tuple(samples)))

    def remaining(self) -> int:
        with self._lock:
            return len(self._script)

    def complete(self, request: LlmRequest) -> list[str]:
        with self._lock:
            if not self._script:
                raise ScriptExhausted(f"no scripted response left for tag {request.tag!r}")
            tag, samples = self._script.popleft()
            if tag != request.tag:
                raise ScriptMismatch(f"script expects tag {tag!r}, call was {request.tag!r}")
            return list(samples)


def load_replay_script(path: str | Path) -> list[tuple[str, list[str]]]:
    """Load a replay fixture: JSONL of {"tag": ..., "samples": [...]}."""
    script = []
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        script.append((obj["tag"], list(obj["samples"])))
    return script


class RemoteBackend:
    """JSON-over-HTTP completion endpoint mirroring LlmRequest fields.

    Transport errors (connection, timeout, 5xx) are retried up to
    `max_retries` times with exponential backoff; content problems are never
    retried here.
    """

    def __init__(self, url: str, auth_token: str | None = None, model: str | None = None,
                 timeout: float = 60.0, max_retries: int = 3,
                 session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep) -> None:
        self.name = f"remote:{model}" if model else "remote"
        self._url = url
        self._model = model
        self._timeout = timeout
        self._max_retries = max_retries
        self._session = session or requests.Session()
        self._sleep = sleep
        self._headers = {"Authorization": f"Bearer {auth_token}"} if auth_token else {}

    def complete(self, request: LlmRequest) -> list[str]:
        payload = {
            "prompt": request.prompt,
            "temperature": request.temperature,
            "sample_count": request.sample_count,
            "max_tokens": request.max_tokens,
            "tag": request.tag,
        }
        if self._model:
            payload["model"] = self._model
        last_error: Exception | None = None
        for attempt in range(self._max_retries):
            try:
                resp = self._session.post(self._url, json=payload,
                                          headers=self._headers, timeout=self._timeout)
            except (requests.ConnectionError, requests.Timeout) as e:
                last_error = e
                self._sleep(0.5 * 2 ** attempt)
                continue
            if resp.status_code >= 500:
                last_error = BackendUnavailable(f"server error {resp.status_code}")
                self._sleep(0.5 * 2 ** attempt)
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"endpoint rejected request: {resp.status_code}")
            try:
                return list(resp.json()["samples"])
            except (ValueError, KeyError, TypeError) as e:
                raise BackendUnavailable(f"malformed completion payload: {e}") from e
        raise BackendUnavailable(f"transport failed after {self._max_retries} attempts: {last_error}")


class LlmGateway:
    """Backend plus ledger; the single entry point for model calls."""

    def __init__(self, backend: CompletionBackend, ledger: CallLedger | None = None,
                 temperatures: dict[str, float] | None = None) -> None:
        self.backend = backend
        self.ledger = ledger or CallLedger()
        self._temperatures = dict(temperatures or {})

    def complete(self, request: LlmRequest) -> LlmResponse:
        """Run one completion call; one call may carry multiple samples.

        The ledger entry for the request tag is incremented by 1 once the
        call completes.
        """
        samples = self.backend.complete(request)
        if not samples:
            raise EmptyResponse(f"backend returned no samples for tag {request.tag!r}")
        self.ledger.record(request.tag)
        return LlmResponse(samples=tuple(samples), backend_name=self.backend.name)

    def ask(self, tag: str, prompt: str, sample_count: int = 1,
            max_tokens: int = 1024) -> LlmResponse:
        """complete() with the configured per-tag temperature default."""
        temperature = self._temperatures.get(tag, self._temperatures.get("default", 0.0))
        return self.complete(LlmRequest(prompt=prompt, tag=tag, temperature=temperature,
                                        sample_count=sample_count, max_tokens=max_tokens))


# A prompt trace is an ordered list of (prompt text, response text) pairs,
# carried through generation so records can be audited.
Trace = list[tuple[str, str]]


def record_trace(trace: Trace | None, prompt: str, samples: tuple[str, ...]) -> None:
    if trace is None:
        return
    response = samples[0] if len(samples) == 1 else json.dumps(list(samples), ensure_ascii=False)
    trace.append((prompt, response))


def parse_yes_no(text: str, default: bool = False, context: str = "") -> bool:
    """Parse a yes/no reply by its leading word; unrecognized replies fall
    back to `default` and are logged."""
    lead = text.strip().lower()
    if lead.startswith("yes"):
        return True
    if lead.startswith("no"):
        return False
    logger.warning("unrecognized yes/no reply%s: %r", f" ({context})" if context else "", text[:80])
    return default
