"""Deterministic mock backends for tests and the `--backend mock` CLI mode.

Every mock is a pure function of its inputs plus a seed: two runs produce
byte-identical outputs. The chat mock understands the engine's own prompt
templates so a full offline+online run works end to end without a model.
"""

from __future__ import annotations

import json
import re
import threading
from hashlib import blake2b
from random import Random
from typing import Callable, Sequence

from compactrag import prompts
from compactrag.backends.base import (
    ChatMessage,
    ChatResponse,
    EmbeddingVector,
    RewriteResult,
    SpanResult,
    count_tokens,
)
from compactrag.textutil import PRONOUNS, lex_tokens


class MockChatModel:
    """Chat backend whose responses come from, in priority order: a
    scripted queue, a responder callable, or a fixed default."""

    def __init__(
        self,
        script: Sequence[str] | None = None,
        responder: Callable[[Sequence[ChatMessage]], str] | None = None,
        default_response: str = "ok",
    ) -> None:
        self._script = list(script or [])
        self._responder = responder
        self._default = default_response
        self._lock = threading.Lock()

    def chat(self, messages: Sequence[ChatMessage], temperature: float = 0.0) -> ChatResponse:
        if not messages:
            raise ValueError("messages must be non-empty")
        prompt = "\n".join(m.content for m in messages)
        with self._lock:
            scripted = self._script.pop(0) if self._script else None
        if scripted is not None:
            text = scripted
        elif self._responder is not None:
            text = self._responder(messages)
        else:
            text = self._default
        return ChatResponse(text, count_tokens(prompt), count_tokens(text))


class MockEmbedder:
    """Seeded hash-of-token-counts embedder.

    Each token hashes to a fixed pseudo-random vector; a text embeds to
    the sum of its token vectors, so lexically overlapping texts score
    higher under cosine. Identical texts embed identically.
    """

    def __init__(self, dim: int = 32, seed: int = 0) -> None:
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self._token_cache: dict[str, list[float]] = {}

    def _token_vector(self, token: str) -> list[float]:
        vec = self._token_cache.get(token)
        if vec is None:
            digest = blake2b(f"{self.seed}|{token}".encode("utf-8"), digest_size=8).digest()
            rng = Random(int.from_bytes(digest, "big"))
            vec = [rng.uniform(-1.0, 1.0) for _ in range(self.dim)]
            self._token_cache[token] = vec
        return vec

    def embed(self, texts: Sequence[str]) -> list[EmbeddingVector]:
        out = []
        for text in texts:
            if not text or text.isspace():
                raise ValueError("cannot embed empty text")
            tokens = lex_tokens(text) or [text]
            acc = [0.0] * self.dim
            for token in tokens:
                vec = self._token_vector(token)
                for i in range(self.dim):
                    acc[i] += vec[i]
            out.append(EmbeddingVector(tuple(acc)))
        return out


class MockSpanExtractor:
    """Argmax token-overlap extractor.

    Picks the context sharing the most tokens with the question (earlier
    index wins ties) and returns its answer segment: the tokens after the
    last ``A:`` marker, or the whole context when no marker exists.
    """

    def extract_span(self, question: str, contexts: Sequence[str]) -> SpanResult:
        if not contexts:
            raise ValueError("contexts must be non-empty")
        question_tokens = set(lex_tokens(question))
        best_index, best_overlap = 0, -1
        for i, context in enumerate(contexts):
            overlap = len(question_tokens & set(lex_tokens(context)))
            if overlap > best_overlap:
                best_index, best_overlap = i, overlap
        tokens = contexts[best_index].split()
        if not tokens:
            raise ValueError("chosen context has no tokens")
        start = 0
        if "A:" in tokens:
            marker = len(tokens) - 1 - tokens[::-1].index("A:")
            if marker + 1 < len(tokens):
                start = marker + 1
        end = len(tokens) - 1
        score = min(1.0, best_overlap / max(1, len(question_tokens)))
        return SpanResult(" ".join(tokens[start : end + 1]), best_index, start, end, score)


_WORD_PARTS = re.compile(r"^(\W*)(.*?)(\W*)$", re.UNICODE)


class MockRewriter:
    """Replaces pronouns with the supplied entities, in order; entities
    that found no pronoun are appended so every entity appears verbatim."""

    def rewrite(self, ambiguous_question: str, entities: Sequence[str]) -> RewriteResult:
        if not ambiguous_question:
            raise ValueError("question must be non-empty")
        if not entities:
            return RewriteResult(ambiguous_question)
        remaining = list(entities)
        words = []
        for word in ambiguous_question.split():
            prefix, core, suffix = _WORD_PARTS.match(word).groups()
            if remaining and core.lower() in PRONOUNS:
                words.append(prefix + remaining.pop(0) + suffix)
            else:
                words.append(word)
        rewritten = " ".join(words)
        for entity in entities:
            if entity not in rewritten:
                rewritten = f"{rewritten} {entity}"
        return RewriteResult(rewritten)


def _norm_loose(text: str) -> str:
    return " ".join(lex_tokens(text))


_DECOMPOSE_MARKER = prompts.DECOMPOSE_PROMPT_TEMPLATE.splitlines()[0]
_SYNTHESIS_MARKER = prompts.SYNTHESIS_PROMPT_TEMPLATE.splitlines()[0]
_VANILLA_MARKER = prompts.VANILLA_PROMPT_TEMPLATE.splitlines()[0]
_JUDGE_MARKER = prompts.JUDGE_PROMPT_TEMPLATE.splitlines()[0]
_READER_MARKER = prompts.READER_PROMPT_TEMPLATE.splitlines()[0]

_PLACEHOLDER = re.compile(r"\{answer:(\d+)\}")
_AFTER_MARK = re.compile(r"\{after:(\d+)\}\s*")


def _mock_decompose(question: str) -> str:
    """Chain questions joined by ``" >> "`` decompose one part per hop.

    Dependencies come from ``{answer:i}`` placeholders in a part's text;
    an ``{after:i}`` marker adds the dependency but is stripped from the
    text, yielding pronoun-style sub-questions with no placeholder.
    """
    parts = [p.strip() for p in question.split(" >> ")] if " >> " in question else [question]
    nodes = []
    for i, part in enumerate(parts, start=1):
        refs = {int(m) for m in _PLACEHOLDER.findall(part)}
        refs |= {int(m) for m in _AFTER_MARK.findall(part)}
        deps = sorted(r for r in refs if 0 < r < i)
        text = _AFTER_MARK.sub("", part).strip()
        nodes.append({"id": i, "question": text, "depends_on": deps})
    return json.dumps(nodes)


def _last_field(prompt: str, label: str) -> str:
    value = ""
    for line in prompt.splitlines():
        if line.startswith(label):
            value = line[len(label) :].strip()
    return value


def engine_mock_responder(messages: Sequence[ChatMessage]) -> str:
    """Rule-based responses for the engine's own prompt templates.

    Decomposition splits on a literal ``" >> "`` chain marker; synthesis
    echoes the last intermediate answer; the judge compares prediction
    and gold after lexical normalization; the reader emits one fact and
    one QA pair per sentence of the passage.
    """
    prompt = "\n".join(m.content for m in messages)
    if prompt.startswith(_JUDGE_MARKER):
        pred = _norm_loose(_last_field(prompt, "Prediction:"))
        gold = _norm_loose(_last_field(prompt, "Ground-truth Answer:"))
        return "yes" if pred and pred == gold else "no"
    if prompt.startswith(_DECOMPOSE_MARKER):
        return _mock_decompose(_last_field(prompt, "Question:"))
    if prompt.startswith(_SYNTHESIS_MARKER):
        answer = "unknown"
        for line in prompt.splitlines():
            m = re.match(r"Intermediate answer \d+: (.*)", line)
            if m:
                answer = m.group(1)
        return answer
    if prompt.startswith(_VANILLA_MARKER):
        for line in prompt.splitlines():
            if line.startswith("- ") and " A: " in line:
                return line.rsplit(" A: ", 1)[1]
        return "unknown"
    if prompt.startswith(_READER_MARKER):
        passage = prompt.rsplit("[Original Text]:\n", 1)[1].split("\n\n[Entity List]:")[0]
        return _mock_read(passage)
    return "ok"


def _mock_read(passage: str) -> str:
    sentences = [s.strip() for s in re.split(r"(?<=[.!?])\s+", passage) if s.strip()]
    facts, qa, seen = [], [], set()
    for sentence in sentences:
        lead = " ".join(sentence.split()[:4])
        question = f'What does the passage state after "{lead}"?'
        if question in seen:
            continue
        seen.add(question)
        facts.append(sentence)
        qa.append({"question": question, "answer": sentence})
    body = json.dumps({"atomic_facts": facts, "qa": qa}, ensure_ascii=False)
    return f"```json\n{body}\n```"


class PipelineMockChat(MockChatModel):
    """Chat mock wired to `engine_mock_responder`."""

    def __init__(self) -> None:
        super().__init__(responder=engine_mock_responder)
