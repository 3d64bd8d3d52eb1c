"""Deterministic scripted backend for tests and offline runs.

A script maps ``(instance_id, agent_index)`` to a response entry. Either key
may be ``"*"`` to act as a wildcard; exact keys win over wildcards, instance
wildcards are tried before agent wildcards. An entry is one of:

* a string, returned verbatim;
* ``{"text": ..., "completion_tokens": ..., "reasoning_tokens": ...}`` to fake
  provider usage numbers;
* ``{"error": "transport" | "terminal"}`` to raise a retryable or terminal
  :class:`BackendError`;
* a list of the above, consumed one per call (the last one repeats);
* in Python, a callable taking the :class:`ChatRequest` and returning a string.

Script files are JSON::

    {"default": "...", "delay_ms": 0,
     "responses": {"q1": {"1": "...", "2": "..."}, "*": {"3": "..."}}}
"""

from __future__ import annotations

import json
import threading
import time
from collections import defaultdict
from pathlib import Path
from typing import Any, Callable, Mapping

from .base import BackendError, ChatRequest, ChatResponse, split_token_counts, whitespace_tokens

WILDCARD = "*"


class ScriptedBackend:
    def __init__(
        self,
        responses: Mapping[tuple[str, Any], Any] | None = None,
        *,
        default: Any = None,
        delay_ms: int = 0,
        count: Callable[[str], int] = whitespace_tokens,
    ):
        self.responses = {(str(i), str(a)): v for (i, a), v in (responses or {}).items()}
        self.default = default
        self.delay_ms = delay_ms
        self.count = count
        self.calls: list[ChatRequest] = []
        self._seen: dict[tuple, int] = defaultdict(int)
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> ScriptedBackend:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(data, **kwargs)

    @classmethod
    def from_dict(cls, data: dict, **kwargs) -> ScriptedBackend:
        responses = {
            (inst, agent): entry
            for inst, per_agent in (data.get("responses") or {}).items()
            for agent, entry in per_agent.items()
        }
        kwargs.setdefault("delay_ms", int(data.get("delay_ms", 0)))
        return cls(responses, default=data.get("default"), **kwargs)

    def _lookup(self, instance_id: str, agent: str):
        for key in ((instance_id, agent), (WILDCARD, agent), (instance_id, WILDCARD), (WILDCARD, WILDCARD)):
            if key in self.responses:
                return key, self.responses[key]
        if self.default is not None:
            return ("<default>", ""), self.default
        raise BackendError(f"no scripted response for ({instance_id}, {agent})", retryable=False)

    def complete(self, request: ChatRequest) -> ChatResponse:
        instance_id = str(request.tags.get("instance_id", WILDCARD))
        agent = str(request.tags.get("agent_index", WILDCARD))
        with self._lock:
            self.calls.append(request)
            key, entry = self._lookup(instance_id, agent)
            if isinstance(entry, list):
                n = self._seen[(instance_id, agent, key)]
                self._seen[(instance_id, agent, key)] = n + 1
                entry = entry[min(n, len(entry) - 1)]
        if self.delay_ms:
            time.sleep(self.delay_ms / 1000)
        if callable(entry):
            entry = entry(request)
        if isinstance(entry, dict) and "error" in entry:
            kind = entry["error"]
            raise BackendError(f"scripted {kind} error", retryable=kind == "transport")
        if isinstance(entry, dict):
            text = entry["text"]
            reasoning, answer = split_token_counts(
                text,
                completion_tokens=entry.get("completion_tokens"),
                reasoning_tokens=entry.get("reasoning_tokens"),
                count=self.count,
            )
        else:
            text = str(entry)
            reasoning, answer = split_token_counts(text, count=self.count)
        return ChatResponse(full_text=text, reasoning_tokens=reasoning, answer_tokens=answer)
