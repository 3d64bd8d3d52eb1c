"""Text embedders for the response-diversity analysis."""

from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx
import numpy as np

from .base import BackendError
from .http import _post_json, _resolve_key


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_tag: str

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("embedding is empty")
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("embedding contains NaN or Inf")

    def __len__(self) -> int:
        return len(self.values)


class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


def check_batch(vectors: Sequence[EmbeddingVector], expected: int) -> list[EmbeddingVector]:
    if len(vectors) != expected:
        raise BackendError(f"expected {expected} embeddings, got {len(vectors)}", retryable=False)
    dims = {len(v) for v in vectors}
    if len(dims) > 1:
        raise BackendError(f"embedding dimension mismatch within batch: {sorted(dims)}", retryable=False)
    return list(vectors)


class HashEmbedder:
    """Stable pseudo-random unit vectors keyed on the exact input text.

    Identical texts map to identical vectors; distinct texts map to nearly
    orthogonal ones. Carries no semantics; it exists so the similarity math
    can run offline and reproducibly.
    """

    def __init__(self, dim: int = 64):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.model_tag = f"hash-{dim}"

    def _vector(self, text: str) -> tuple[float, ...]:
        seed = int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")
        v = np.random.default_rng(seed).standard_normal(self.dim)
        return tuple((v / np.linalg.norm(v)).tolist())

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("embed() needs at least one text")
        return check_batch([EmbeddingVector(self._vector(t), self.model_tag) for t in texts], len(texts))


class HttpEmbedder:
    """Client for an OpenAI-compatible ``/embeddings`` endpoint."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key_env: str | None = None,
        timeout_s: float = 120.0,
        max_in_flight: int = 8,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout_s, transport=transport)

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("embed() needs at least one text")
        headers = {"Content-Type": "application/json"}
        key = _resolve_key(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        with self._slots:
            data = _post_json(
                self._client, f"{self.endpoint}/embeddings",
                {"model": self.model, "input": list(texts)}, headers,
            )
        try:
            items = sorted(data["data"], key=lambda d: d.get("index", 0))
            vectors = [EmbeddingVector(item["embedding"], self.model) for item in items]
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"malformed embeddings response: {exc}", retryable=False) from exc
        return check_batch(vectors, len(texts))
