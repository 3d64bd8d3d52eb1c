from .base import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    BackendError,
    ChatBackend,
    ChatRequest,
    ChatResponse,
    complete_with_retry,
    split_think,
    split_token_counts,
    whitespace_tokens,
)
from .embed import EmbeddingVector, Embedder, HashEmbedder, HttpEmbedder
from .http import HttpChatBackend, parse_chat_response
from .mock import ScriptedBackend

__all__ = [
    "DEFAULT_MAX_TOKENS",
    "DEFAULT_TEMPERATURE",
    "BackendError",
    "ChatBackend",
    "ChatRequest",
    "ChatResponse",
    "EmbeddingVector",
    "Embedder",
    "HashEmbedder",
    "HttpChatBackend",
    "HttpEmbedder",
    "ScriptedBackend",
    "complete_with_retry",
    "parse_chat_response",
    "split_think",
    "split_token_counts",
    "whitespace_tokens",
]
