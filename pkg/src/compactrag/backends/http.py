"""HTTP backends: OpenAI-compatible chat/embeddings plus the model sidecar.

Transport failures are retried twice with a fixed backoff, then surface
as TransportError. Responses that parse but lack the expected fields
raise ProtocolError.
"""

from __future__ import annotations

import logging
import os
import time
from typing import Any, Sequence

import requests

from compactrag.backends.base import (
    ChatMessage,
    ChatResponse,
    EmbeddingVector,
    EntityMention,
    RewriteResult,
    SpanResult,
    count_tokens,
)
from compactrag.errors import ProtocolError, TransportError

logger = logging.getLogger(__name__)

API_KEY_ENV = "COMPACTRAG_API_KEY"

MAX_RETRIES = 2
BACKOFF_SECONDS = 1.0


def _post_json(
    url: str,
    payload: dict,
    headers: dict | None = None,
    timeout: float = 60.0,
    backoff: float | None = None,
) -> Any:
    if backoff is None:
        backoff = BACKOFF_SECONDS
    last_error: Exception | None = None
    for attempt in range(MAX_RETRIES + 1):
        try:
            response = requests.post(url, json=payload, headers=headers or {}, timeout=timeout)
            response.raise_for_status()
        except (requests.ConnectionError, requests.Timeout, requests.HTTPError) as exc:
            last_error = exc
            if attempt < MAX_RETRIES:
                logger.warning("POST %s failed (%s), retry %d", url, exc, attempt + 1)
                time.sleep(backoff)
            continue
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolError(f"non-JSON body from {url}") from exc
    raise TransportError(f"POST {url} failed after {MAX_RETRIES + 1} attempts") from last_error


class OpenAIChatClient:
    """`POST {base_url}/v1/chat/completions` with usage accounting."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 120.0,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout

    def chat(self, messages: Sequence[ChatMessage], temperature: float = 0.0) -> ChatResponse:
        if not messages:
            raise ValueError("messages must be non-empty")
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": temperature,
        }
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = _post_json(
            f"{self.base_url}/v1/chat/completions", payload, headers, timeout=self.timeout
        )
        try:
            text = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError("chat completion body missing choices[0].message.content") from exc
        usage = body.get("usage") or {}
        prompt_text = "\n".join(m.content for m in messages)
        return ChatResponse(
            text=text,
            prompt_tokens=int(usage.get("prompt_tokens", count_tokens(prompt_text))),
            completion_tokens=int(usage.get("completion_tokens", count_tokens(text))),
        )


class OpenAIEmbeddingsClient:
    """`POST {base_url}/v1/embeddings`."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 120.0,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.timeout = timeout

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        for text in texts:
            if not text or text.isspace():
                raise ValueError("cannot embed empty text")
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        body = _post_json(
            f"{self.base_url}/v1/embeddings",
            {"model": self.model, "input": list(texts)},
            headers,
            timeout=self.timeout,
        )
        try:
            rows = body["data"]
            vectors = [EmbeddingVector(tuple(float(x) for x in row["embedding"])) for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError("embeddings body missing data[i].embedding") from exc
        if len(vectors) != len(texts):
            raise ProtocolError(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        return vectors


class SidecarClient:
    """Client for the model sidecar: /extract, /rewrite, /entities."""

    def __init__(self, base_url: str, timeout: float = 60.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def extract_span(self, question: str, contexts: Sequence[str]) -> SpanResult:
        if not contexts:
            raise ValueError("contexts must be non-empty")
        body = _post_json(
            f"{self.base_url}/extract",
            {"question": question, "contexts": list(contexts)},
            timeout=self.timeout,
        )
        try:
            return SpanResult(
                answer_text=body["answer"],
                context_index=int(body["context_index"]),
                start=int(body["start"]),
                end=int(body["end"]),
                score=float(body["score"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError("extract body missing answer/context_index/start/end/score") from exc

    def rewrite(self, ambiguous_question: str, entities: Sequence[str]) -> RewriteResult:
        if not ambiguous_question:
            raise ValueError("question must be non-empty")
        body = _post_json(
            f"{self.base_url}/rewrite",
            {"question": ambiguous_question, "entities": list(entities)},
            timeout=self.timeout,
        )
        try:
            return RewriteResult(rewritten=body["rewritten"])
        except (KeyError, TypeError) as exc:
            raise ProtocolError("rewrite body missing rewritten") from exc

    def annotate_entities(self, passage_text: str) -> list[EntityMention]:
        body = _post_json(
            f"{self.base_url}/entities", {"text": passage_text}, timeout=self.timeout
        )
        try:
            return [
                EntityMention(
                    surface=m["surface"],
                    label=m["label"],
                    char_start=int(m["char_start"]),
                    char_end=int(m["char_end"]),
                )
                for m in body["mentions"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError("entities body missing mentions[]") from exc
