from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

DEFAULT_TEMPERATURE = 0.6
DEFAULT_MAX_TOKENS = 4096
MIN_MAX_TOKENS = 64

THINK_CLOSE = "</think>"
THINK_OPEN = "<think>"


class BackendError(Exception):
    """A failed provider call.

    ``retryable`` separates transient failures (transport, timeouts, 429/5xx)
    from terminal ones (bad request, malformed payload, exhausted retries).
    """

    def __init__(self, message: str, *, retryable: bool, status: int | None = None):
        super().__init__(message)
        self.retryable = retryable
        self.status = status


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    stop: tuple[str, ...] | None = None
    # Routing metadata (instance id, agent index); never sent over the wire.
    tags: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValueError("system and user prompts must be non-empty")
        if self.max_tokens < MIN_MAX_TOKENS:
            raise ValueError(f"max_tokens must be >= {MIN_MAX_TOKENS}, got {self.max_tokens}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be non-negative, got {self.temperature}")
        if self.stop is not None:
            object.__setattr__(self, "stop", tuple(self.stop))


@dataclass(frozen=True)
class ChatResponse:
    full_text: str
    reasoning_tokens: int = 0
    answer_tokens: int = 0
    latency_ms: int = 0

    def __post_init__(self):
        if self.reasoning_tokens < 0 or self.answer_tokens < 0 or self.latency_ms < 0:
            raise ValueError("token counts and latency must be non-negative")


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def whitespace_tokens(text: str) -> int:
    return len(text.split())


def split_think(text: str) -> tuple[str, str] | None:
    """Split an R1-style ``<think>...</think>`` prefix from the answer.

    The opening tag may be missing (some servers strip it), but there must be
    exactly one closing tag and nothing but whitespace before an opening tag.
    """
    if text.count(THINK_CLOSE) != 1:
        return None
    head, tail = text.split(THINK_CLOSE, 1)
    stripped = head.lstrip()
    if stripped.startswith(THINK_OPEN):
        stripped = stripped[len(THINK_OPEN):]
    if THINK_OPEN in stripped:
        return None
    return stripped, tail


def split_token_counts(
    text: str,
    *,
    completion_tokens: int | None = None,
    reasoning_tokens: int | None = None,
    reasoning_text: str | None = None,
    count: Callable[[str], int] = whitespace_tokens,
) -> tuple[int, int]:
    """Return ``(reasoning_tokens, answer_tokens)`` for one completion.

    Precedence: a provider-reported reasoning count, then a think-delimited
    prefix (or a separate reasoning text), else everything is answer tokens.
    When the provider reports a completion total the split always sums to it;
    a text-derived split is then scaled proportionally onto that total.
    """
    if reasoning_tokens is not None and completion_tokens is not None:
        reasoning = min(max(reasoning_tokens, 0), completion_tokens)
        return reasoning, completion_tokens - reasoning

    if reasoning_text is not None:
        segments = (reasoning_text, text)
    else:
        segments = split_think(text)

    if segments is None:
        total = completion_tokens if completion_tokens is not None else count(text)
        return 0, total

    r_count, a_count = count(segments[0]), count(segments[1])
    if completion_tokens is None:
        return r_count, a_count
    if r_count + a_count == 0:
        return 0, completion_tokens
    reasoning = round(completion_tokens * r_count / (r_count + a_count))
    return reasoning, completion_tokens - reasoning


def complete_with_retry(backend: ChatBackend, request: ChatRequest, retries: int = 1) -> ChatResponse:
    """Call ``backend.complete`` with a bounded number of retries on transient errors."""
    backoff = getattr(backend, "retry_backoff_s", 0.0)
    attempt = 0
    while True:
        try:
            return backend.complete(request)
        except BackendError as exc:
            if not exc.retryable:
                raise
            if attempt >= retries:
                raise BackendError(
                    f"gave up after {attempt + 1} attempts: {exc}", retryable=False, status=exc.status
                ) from exc
            attempt += 1
            if backoff:
                time.sleep(backoff * attempt)
