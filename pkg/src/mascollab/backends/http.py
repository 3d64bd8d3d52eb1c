"""OpenAI-compatible chat-completion and embedding clients."""

from __future__ import annotations

import os
import threading
import time

import httpx

from .base import BackendError, ChatRequest, ChatResponse, split_token_counts


def _resolve_key(api_key_env: str | None) -> str | None:
    if not api_key_env:
        return None
    key = os.environ.get(api_key_env)
    if not key:
        raise BackendError(f"environment variable {api_key_env} is not set", retryable=False)
    return key


def _post_json(client: httpx.Client, url: str, payload: dict, headers: dict) -> dict:
    try:
        resp = client.post(url, json=payload, headers=headers)
    except httpx.TimeoutException as exc:
        raise BackendError(f"timeout calling {url}: {exc}", retryable=True) from exc
    except httpx.TransportError as exc:
        raise BackendError(f"transport error calling {url}: {exc}", retryable=True) from exc
    if resp.status_code == 429 or resp.status_code >= 500:
        raise BackendError(f"HTTP {resp.status_code}: {resp.text[:500]}", retryable=True, status=resp.status_code)
    if resp.status_code >= 400:
        raise BackendError(f"HTTP {resp.status_code}: {resp.text[:500]}", retryable=False, status=resp.status_code)
    try:
        return resp.json()
    except ValueError as exc:
        raise BackendError(f"non-JSON response from {url}", retryable=False, status=resp.status_code) from exc


class HttpChatBackend:
    """Chat backend speaking the ``/chat/completions`` wire format.

    A single attempt per :meth:`complete`; retries are the caller's job (see
    :func:`~mascollab.backends.base.complete_with_retry`). At most
    ``max_in_flight`` requests are outstanding at once across threads.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key_env: str | None = None,
        timeout_s: float = 300.0,
        max_in_flight: int = 8,
        retry_backoff_s: float = 2.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.retry_backoff_s = retry_backoff_s
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = _resolve_key(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def payload(self, request: ChatRequest) -> dict:
        body = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": request.system_prompt},
                {"role": "user", "content": request.user_prompt},
            ],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        if request.stop:
            body["stop"] = list(request.stop)
        return body

    def complete(self, request: ChatRequest) -> ChatResponse:
        headers = self._headers()
        start = time.perf_counter()
        with self._slots:
            data = _post_json(self._client, f"{self.endpoint}/chat/completions", self.payload(request), headers)
        latency_ms = int((time.perf_counter() - start) * 1000)
        return parse_chat_response(data, latency_ms=latency_ms)

    def close(self) -> None:
        self._client.close()


def parse_chat_response(data: dict, *, latency_ms: int = 0) -> ChatResponse:
    try:
        message = data["choices"][0]["message"]
    except (KeyError, IndexError, TypeError) as exc:
        raise BackendError("response carries no choices[0].message", retryable=False) from exc
    text = message.get("content") or ""
    usage = data.get("usage") or {}
    completion = usage.get("completion_tokens")
    details = usage.get("completion_tokens_details") or {}
    reasoning = details.get("reasoning_tokens", usage.get("reasoning_tokens"))
    reasoning_tokens, answer_tokens = split_token_counts(
        text,
        completion_tokens=completion,
        reasoning_tokens=reasoning,
        reasoning_text=message.get("reasoning_content"),
    )
    return ChatResponse(
        full_text=text,
        reasoning_tokens=reasoning_tokens,
        answer_tokens=answer_tokens,
        latency_ms=latency_ms,
    )
