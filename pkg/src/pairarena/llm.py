"""Provider-neutral chat-completion client with retries and rate limiting.

The wire protocol is the common denominator of hosted chat APIs: request
{model, messages, temperature, max_tokens}, response {choices[0].message
.content, usage}. Credentials come from the environment variable named in the
model config, never from flags or files.

`stub://` endpoints resolve to deterministic offline clients so whole
pipelines can run (and be replayed bit-for-bit) without network access.
"""

from __future__ import annotations

import hashlib
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Protocol, Sequence, TypeVar
from urllib.parse import parse_qs, urlparse

import httpx

Message = dict[str, str]

DEFAULT_MAX_ATTEMPTS = 5
DEFAULT_BASE_DELAY = 1.0
DEFAULT_BACKOFF_FACTOR = 2.0


class TransportError(RuntimeError):
    """Transient failure: network error, 429, or 5xx. Retryable."""


class ClientError(RuntimeError):
    """Non-retryable failure: the request itself was rejected."""


@dataclass(frozen=True)
class ModelConfig:
    model_name: str
    endpoint: str
    temperature: float = 0.0
    max_output_tokens: int = 1024
    cot_enabled: bool = True
    credentials_env: str | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_output_tokens < 1:
            raise ValueError(f"max_output_tokens must be >= 1, got {self.max_output_tokens}")

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "endpoint": self.endpoint,
            "temperature": self.temperature,
            "max_output_tokens": self.max_output_tokens,
            "cot_enabled": self.cot_enabled,
            "credentials_env": self.credentials_env,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        return cls(
            model_name=str(data["model_name"]),
            endpoint=str(data["endpoint"]),
            temperature=float(data.get("temperature", 0.0)),
            max_output_tokens=int(data.get("max_output_tokens", 1024)),
            cot_enabled=bool(data.get("cot_enabled", True)),
            credentials_env=data.get("credentials_env"),
        )


@dataclass(frozen=True)
class ChatResponse:
    content: str
    usage: dict[str, int] = field(default_factory=dict)
    attempts: int = 1


class ChatClient(Protocol):
    def complete(self, messages: Sequence[Message], config: ModelConfig) -> ChatResponse: ...


class RateLimiter:
    """Shared minimum-interval budget across worker threads."""

    def __init__(self, max_per_second: float | None = None, clock=time.monotonic, sleep=time.sleep):
        self._interval = 1.0 / max_per_second if max_per_second else 0.0
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> None:
        if self._interval <= 0:
            return
        with self._lock:
            now = self._clock()
            wait = self._next_slot - now
            self._next_slot = max(self._next_slot, now) + self._interval
        if wait > 0:
            self._sleep(wait)


def generate_with_retry(
    client: ChatClient,
    messages: Sequence[Message],
    config: ModelConfig,
    *,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    base_delay: float = DEFAULT_BASE_DELAY,
    backoff_factor: float = DEFAULT_BACKOFF_FACTOR,
    sleep: Callable[[float], None] = time.sleep,
    rate_limiter: RateLimiter | None = None,
) -> ChatResponse:
    """Call the client, retrying transient failures with exponential backoff."""
    last_error: Exception | None = None
    for attempt in range(1, max_attempts + 1):
        if rate_limiter is not None:
            rate_limiter.acquire()
        try:
            response = client.complete(messages, config)
            return replace(response, attempts=attempt)
        except TransportError as exc:
            last_error = exc
            if attempt < max_attempts:
                sleep(base_delay * backoff_factor ** (attempt - 1))
    raise TransportError(f"request failed after {max_attempts} attempts: {last_error}")


class HttpChatClient:
    """POSTs the neutral chat payload to the configured endpoint."""

    def __init__(self, timeout: float = 60.0):
        self._http = httpx.Client(timeout=timeout)

    def complete(self, messages: Sequence[Message], config: ModelConfig) -> ChatResponse:
        headers = {}
        if config.credentials_env:
            token = os.environ.get(config.credentials_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": config.model_name,
            "messages": list(messages),
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
        }
        try:
            response = self._http.post(config.endpoint, json=payload, headers=headers)
        except httpx.HTTPError as exc:
            raise TransportError(f"transport failure: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransportError(f"retryable status {response.status_code}")
        if response.status_code >= 400:
            raise ClientError(f"status {response.status_code}: {response.text[:200]}")
        data = response.json()
        return ChatResponse(
            content=data["choices"][0]["message"]["content"],
            usage=data.get("usage", {}),
        )


def _digest(*parts: str) -> str:
    return hashlib.sha256("\x1f".join(parts).encode("utf-8")).hexdigest()


_QUERY_BLOCK_RE = re.compile(r"<query>\s*(.*?)\s*</query>", re.DOTALL)
_ANSWER_1_RE = re.compile(r"<answer 1>\s*(.*?)\s*</answer 1>", re.DOTALL)
_ANSWER_2_RE = re.compile(r"<answer 2>\s*(.*?)\s*</answer 2>", re.DOTALL)


class StubChatClient:
    """Deterministic offline client resolved from a stub:// endpoint.

    Modes (the endpoint host):
      echo    -- return the `text` query parameter verbatim
      answer  -- synthesize an answer from (model, query); a stable hash of
                 the pair decides between a cited-style answer and a refusal
      judge   -- prefer whichever presented answer has the larger content
                 digest; equal texts tie. `garbage_first=1` makes the first
                 call return unparseable text (for retry paths)
      flaky   -- raise TransportError for the first `fails` calls, then echo
    """

    def __init__(self, endpoint: str):
        parsed = urlparse(endpoint)
        if parsed.scheme != "stub":
            raise ValueError(f"not a stub endpoint: {endpoint}")
        self.mode = parsed.netloc or parsed.path.lstrip("/")
        self.params = {k: v[-1] for k, v in parse_qs(parsed.query).items()}
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, messages: Sequence[Message], config: ModelConfig) -> ChatResponse:
        with self._lock:
            self.calls += 1
            call_index = self.calls
        prompt = messages[-1]["content"] if messages else ""
        if self.mode == "echo":
            return ChatResponse(content=self.params.get("text", ""))
        if self.mode == "flaky":
            fails = int(self.params.get("fails", "0"))
            if call_index <= fails:
                raise TransportError(f"stub failure {call_index}/{fails}")
            return ChatResponse(content=self.params.get("text", "ok"))
        if self.mode == "answer":
            return self._answer(prompt, config)
        if self.mode == "judge":
            if self.params.get("garbage_first") and call_index == 1:
                return ChatResponse(content="no rating to be found here")
            return self._judge(prompt)
        raise ClientError(f"unknown stub mode {self.mode!r}")

    def _answer(self, prompt: str, config: ModelConfig) -> ChatResponse:
        match = None
        for match in _QUERY_BLOCK_RE.finditer(prompt):
            pass
        question = match.group(1) if match else prompt
        digest = _digest(config.model_name, question)
        thinking = f"<thinking>Weighing the passages against item {digest[:6]}.</thinking>"
        if int(digest[:8], 16) % 4 == 0:
            return ChatResponse(content=f"{thinking}I couldn't find an answer.")
        body = (
            f"Drawing on the passages, the key point is {digest[:10]}; "
            f"supporting detail appears under {digest[10:18]}."
        )
        return ChatResponse(content=f"{thinking}{body}")

    def _judge(self, prompt: str) -> ChatResponse:
        first = second = None
        for first in _ANSWER_1_RE.finditer(prompt):
            pass
        for second in _ANSWER_2_RE.finditer(prompt):
            pass
        if first is None or second is None:
            raise ClientError("judge stub could not locate answer blocks")
        text_1, text_2 = first.group(1), second.group(1)
        if text_1 == text_2:
            rating = 0
        else:
            rating = 1 if _digest(text_1) > _digest(text_2) else 2
        return ChatResponse(
            content=f"<thinking>Compared both answers on the rubric.</thinking><rating>{rating}</rating>"
        )


def make_client(config: ModelConfig) -> ChatClient:
    """Resolve the endpoint scheme to an HTTP client or an offline stub."""
    if config.endpoint.startswith("stub:"):
        return StubChatClient(config.endpoint)
    return HttpChatClient()


T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], parallelism: int = 1) -> list[R]:
    """Order-preserving map with a bounded worker pool."""
    items = list(items)
    if parallelism <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))
