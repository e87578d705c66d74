"""Domain types and interfaces for the learned components.

Five backend roles exist: chat model, embedder, span extractor, question
rewriter, and entity annotator. Everything downstream programs against
these interfaces so a deterministic mock, an HTTP service, or a locally
served model are interchangeable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown chat role: {self.role!r}")
        if self.role == "user" and not self.content:
            raise ValueError("user messages must have non-empty content")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    prompt_tokens: int
    completion_tokens: int

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0:
            raise ValueError("token counts must be non-negative")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SpanResult:
    """A span over the whitespace tokens of one context.

    ``answer_text`` is the tokens ``[start, end]`` of
    ``contexts[context_index]`` rejoined with single spaces.
    """

    answer_text: str
    context_index: int
    start: int
    end: int
    score: float

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError("span start must not exceed end")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError("span score must lie in [0, 1]")


@dataclass(frozen=True)
class RewriteResult:
    rewritten: str


@dataclass(frozen=True)
class EntityMention:
    surface: str
    label: str
    char_start: int
    char_end: int


@runtime_checkable
class ChatBackend(Protocol):
    def chat(self, messages: Sequence[ChatMessage], temperature: float = 0.0) -> ChatResponse: ...


@runtime_checkable
class Embedder(Protocol):
    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]: ...


@runtime_checkable
class SpanExtractor(Protocol):
    def extract_span(self, question: str, contexts: Sequence[str]) -> SpanResult: ...


@runtime_checkable
class Rewriter(Protocol):
    def rewrite(self, ambiguous_question: str, entities: Sequence[str]) -> RewriteResult: ...


@runtime_checkable
class EntityAnnotator(Protocol):
    def annotate_entities(self, passage_text: str) -> list[EntityMention]: ...


_WHITESPACE = re.compile(r"\s+")


def count_tokens(text: str) -> int:
    """Whitespace-delimited token count; the fallback when a backend
    reports no usage."""
    if not text or text.isspace():
        return 0
    return len(_WHITESPACE.split(text.strip()))


def span_slice(context: str, start: int, end: int) -> str:
    """Rejoin the whitespace-token span ``[start, end]`` of ``context``."""
    tokens = context.split()
    if start < 0 or end >= len(tokens):
        raise ValueError(f"span [{start}, {end}] out of range for {len(tokens)} tokens")
    return " ".join(tokens[start : end + 1])
