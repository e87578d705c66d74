"""Backend interfaces, mocks, HTTP clients, and the default entity tagger."""

from compactrag.backends.base import (
    ChatBackend,
    ChatMessage,
    ChatResponse,
    Embedder,
    EmbeddingVector,
    EntityAnnotator,
    EntityMention,
    RewriteResult,
    Rewriter,
    SpanExtractor,
    SpanResult,
    count_tokens,
    span_slice,
)
from compactrag.backends.entities import RuleBasedAnnotator
from compactrag.backends.http import (
    OpenAIChatClient,
    OpenAIEmbeddingsClient,
    SidecarClient,
)
from compactrag.backends.mock import (
    MockChatModel,
    MockEmbedder,
    MockRewriter,
    MockSpanExtractor,
    PipelineMockChat,
)

__all__ = [
    "ChatBackend",
    "ChatMessage",
    "ChatResponse",
    "Embedder",
    "EmbeddingVector",
    "EntityAnnotator",
    "EntityMention",
    "MockChatModel",
    "MockEmbedder",
    "MockRewriter",
    "MockSpanExtractor",
    "OpenAIChatClient",
    "OpenAIEmbeddingsClient",
    "PipelineMockChat",
    "RewriteResult",
    "Rewriter",
    "RuleBasedAnnotator",
    "SidecarClient",
    "SpanExtractor",
    "SpanResult",
    "count_tokens",
    "span_slice",
]
