"""Text-completion client: retries, admission control, and cache busting.

The client wraps a pluggable transport (HTTP provider or in-process mock)
with bounded retries on transient failures, a concurrency semaphore, and an
optional total-call budget. Requests carry two routing keys, a user key and
a prompt-cache key; regenerating both before a call guarantees the provider
cannot serve the response from a prompt cache, which matters when the same
prompt is intentionally scored several times.
"""

from __future__ import annotations

import os
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol

import httpx

from .errors import BudgetError, ConfigurationError, TransportError

API_KEY_ENV = "DISPARITY_LLM_API_KEY"
BASE_URL_ENV = "DISPARITY_LLM_BASE_URL"
MODEL_ENV = "DISPARITY_LLM_MODEL"

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_MODEL = "gpt-4o-mini"

DEFAULT_MAX_RETRIES = 3
DEFAULT_MAX_CONCURRENCY = 4

REDACTED = "***"


def fresh_key() -> str:
    return str(uuid.uuid4())


@dataclass(frozen=True)
class CompletionRequest:
    """One completion call; immutable so retries resend identical bytes.

    ``model_id`` and ``reasoning_tier`` pass through to the provider
    opaquely; empty means the transport's configured defaults.
    """

    prompt: str
    system: str = ""
    temperature: float = 0.0
    max_output: int = 1024
    model_id: str = ""
    reasoning_tier: str = ""
    user_key: str = field(default_factory=fresh_key)
    cache_key: str = field(default_factory=fresh_key)

    def with_cache_busting(self) -> "CompletionRequest":
        """Copy with fresh routing keys, defeating provider-side caching."""
        return replace(self, user_key=fresh_key(), cache_key=fresh_key())


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    model: str = ""
    input_tokens: int = 0
    output_tokens: int = 0
    latency_ms: float = 0.0
    attempt_count: int = 1


class Transport(Protocol):
    def complete(self, request: CompletionRequest) -> CompletionResponse: ...


class LlmClient:
    """Retrying, admission-controlled facade over a transport.

    Transient transport failures are retried with exponential backoff; at
    most ``max_retries + 1`` transport calls happen per request. Fatal
    failures and authentication problems propagate immediately. When a call
    budget is set, every transport call consumes one unit and exhaustion
    raises BudgetError before the call is attempted.
    """

    def __init__(
        self,
        transport: Transport,
        *,
        max_retries: int = DEFAULT_MAX_RETRIES,
        max_concurrency: int = DEFAULT_MAX_CONCURRENCY,
        backoff_base: float = 0.1,
        budget: int | None = None,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if max_retries < 0:
            raise ConfigurationError("max_retries must be >= 0")
        if max_concurrency < 1:
            raise ConfigurationError("max_concurrency must be >= 1")
        if budget is not None and budget < 1:
            raise ConfigurationError("budget must be >= 1 when set")
        self._transport = transport
        self._max_retries = max_retries
        self._backoff_base = backoff_base
        self._semaphore = threading.Semaphore(max_concurrency)
        self._budget_lock = threading.Lock()
        self._remaining = budget
        self._sleeper = sleeper
        self.calls_made = 0

    def _spend(self) -> None:
        with self._budget_lock:
            if self._remaining is not None:
                if self._remaining <= 0:
                    raise BudgetError("completion call budget exhausted")
                self._remaining -= 1
            self.calls_made += 1

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        with self._semaphore:
            last: TransportError | None = None
            for attempt in range(self._max_retries + 1):
                self._spend()
                started = time.monotonic()
                try:
                    response = self._transport.complete(request)
                except TransportError as exc:
                    last = exc
                    if not exc.transient:
                        raise TransportError(
                            str(exc), attempts=attempt + 1, transient=False
                        )
                    if attempt < self._max_retries:
                        self._sleeper(self._backoff_base * (2 ** attempt))
                    continue
                return replace(
                    response,
                    attempt_count=attempt + 1,
                    latency_ms=(time.monotonic() - started) * 1000.0,
                )
            raise TransportError(
                f"gave up after {self._max_retries + 1} attempts: {last}",
                attempts=self._max_retries + 1,
                transient=True,
            )


class MockTransport:
    """Scripted transport for tests.

    ``script`` is consumed one element per call: a string succeeds with
    that text, an exception instance is raised. When the script runs dry
    the last element repeats. All requests are recorded.
    """

    def __init__(self, script: list):
        if not script:
            raise ConfigurationError("mock transport needs a non-empty script")
        self._script = list(script)
        self._cursor = 0
        self.requests: list[CompletionRequest] = []

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        self.requests.append(request)
        step = self._script[min(self._cursor, len(self._script) - 1)]
        self._cursor += 1
        if isinstance(step, Exception):
            raise step
        return CompletionResponse(text=str(step), model="mock")


class HttpTransport:
    """Chat-completions transport against an OpenAI-style endpoint.

    Credentials and routing come from the environment: DISPARITY_LLM_API_KEY
    (required), DISPARITY_LLM_BASE_URL, DISPARITY_LLM_MODEL. The request's
    user key is forwarded as ``user`` and the cache key as
    ``prompt_cache_key``. The audit hook receives request metadata with the
    credential redacted; the key itself is never written anywhere.
    """

    def __init__(
        self,
        *,
        api_key: str | None = None,
        base_url: str | None = None,
        model: str | None = None,
        timeout: float = 60.0,
        audit: Callable[[dict], None] | None = None,
        client: httpx.Client | None = None,
    ):
        self._api_key = api_key or os.environ.get(API_KEY_ENV, "")
        if not self._api_key:
            raise ConfigurationError(
                f"no provider credential: set {API_KEY_ENV} or pass api_key"
            )
        self._base_url = (base_url or os.environ.get(BASE_URL_ENV, DEFAULT_BASE_URL)).rstrip("/")
        self._model = model or os.environ.get(MODEL_ENV, DEFAULT_MODEL)
        self._audit = audit
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.prompt})
        model = request.model_id or self._model
        payload = {
            "model": model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_output,
            "user": request.user_key,
            "prompt_cache_key": request.cache_key,
        }
        if request.reasoning_tier:
            payload["reasoning_effort"] = request.reasoning_tier
        if self._audit:
            self._audit(
                {
                    "url": f"{self._base_url}/chat/completions",
                    "model": model,
                    "user": request.user_key,
                    "prompt_cache_key": request.cache_key,
                    "authorization": REDACTED,
                    "prompt_chars": len(request.prompt),
                }
            )
        try:
            response = self._client.post(
                f"{self._base_url}/chat/completions",
                json=payload,
                headers={"Authorization": f"Bearer {self._api_key}"},
            )
        except httpx.HTTPError as exc:
            raise TransportError(f"network failure: {exc}", transient=True)
        if response.status_code in (401, 403):
            raise ConfigurationError(
                f"provider rejected credentials (HTTP {response.status_code})"
            )
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(
                f"provider transient failure (HTTP {response.status_code})",
                transient=True,
            )
        if response.status_code >= 400:
            raise TransportError(
                f"provider rejected request (HTTP {response.status_code}): "
                f"{response.text[:200]}",
                transient=False,
            )
        body = response.json()
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise TransportError("malformed provider response body", transient=False)
        usage = body.get("usage", {}) or {}
        return CompletionResponse(
            text=text,
            model=body.get("model", model),
            input_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
        )


def client_from_env(**kwargs) -> LlmClient:
    """LlmClient over an HttpTransport configured from the environment."""
    return LlmClient(HttpTransport(), **kwargs)
