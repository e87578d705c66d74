"""Online stage: decompose, resolve hops locally, synthesize.

The large model is invoked exactly twice per query no matter how many
hops the plan has: once to decompose, once to synthesize. Everything in
between (retrieval, span extraction, rewriting) runs on local modules
and is metered on the per-query ledger.

Modes:
  full            placeholders substituted, rewriter grounds what remains
  no_rewriter     placeholders substituted, parent answers appended
  retrieval_only  raw sub-question text retrieves directly
  vanilla_rag     no decomposition; single retrieve-then-answer call
"""

from __future__ import annotations

import enum
import json
import logging
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from compactrag import prompts
from compactrag.backends.base import (
    ChatBackend,
    ChatMessage,
    Embedder,
    Rewriter,
    SpanExtractor,
)
from compactrag.errors import CompactRAGError, DecompositionError, QueryError
from compactrag.index import DEFAULT_TOP_K, VectorIndex, search
from compactrag.kbgen import KnowledgeBase, QAPair
from compactrag.ledger import CallLedger
from compactrag.textutil import contains_pronoun

logger = logging.getLogger(__name__)

DECOMPOSE_RETRIES = 2
EXTRACTOR_SCORE_FLOOR = 0.1


class Mode(str, enum.Enum):
    FULL = "full"
    NO_REWRITER = "no_rewriter"
    RETRIEVAL_ONLY = "retrieval_only"
    VANILLA_RAG = "vanilla_rag"


@dataclass(frozen=True)
class SubQuestion:
    id: int
    text: str
    depends_on: tuple[int, ...]


@dataclass(frozen=True)
class DecompositionPlan:
    original: str
    sub_questions: tuple[SubQuestion, ...]


@dataclass(frozen=True)
class HopRecord:
    sub_id: int
    raw_text: str
    resolved_text: str
    retrieved: tuple[tuple[QAPair, float], ...]
    extracted_answer: str
    fallback_used: bool


@dataclass(frozen=True)
class EvidenceBundle:
    plan: DecompositionPlan
    hops: tuple[HopRecord, ...]


@dataclass(frozen=True)
class QueryResult:
    answer: str
    evidence: EvidenceBundle
    ledger: CallLedger
    mode: Mode


@dataclass
class Services:
    chat: ChatBackend
    embedder: Embedder
    extractor: SpanExtractor
    rewriter: Rewriter


_PLACEHOLDER = re.compile(r"\{answer:(\d+)\}")
_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def _validate_plan(raw: str, original: str) -> DecompositionPlan:
    fenced = _FENCE.search(raw)
    body = fenced.group(1) if fenced else raw
    items = json.loads(body)
    if not isinstance(items, list) or not items:
        raise DecompositionError("plan must be a non-empty JSON array")
    subs = []
    ids: set[int] = set()
    for item in items:
        if not isinstance(item, dict):
            raise DecompositionError("plan items must be objects")
        sub_id = item.get("id")
        text = item.get("question")
        deps = item.get("depends_on", [])
        if not isinstance(sub_id, int) or sub_id < 1 or sub_id in ids:
            raise DecompositionError(f"bad sub-question id: {sub_id!r}")
        if not isinstance(text, str) or not text.strip():
            raise DecompositionError(f"sub-question {sub_id} has empty text")
        if not isinstance(deps, list) or not all(isinstance(d, int) for d in deps):
            raise DecompositionError(f"sub-question {sub_id} has malformed depends_on")
        if sub_id in deps:
            raise DecompositionError(f"sub-question {sub_id} depends on itself")
        ids.add(sub_id)
        subs.append(SubQuestion(sub_id, text.strip(), tuple(deps)))
    for sub in subs:
        for dep in sub.depends_on:
            if dep not in ids:
                raise DecompositionError(f"sub-question {sub.id} depends on unknown id {dep}")
    plan = DecompositionPlan(original, tuple(subs))
    topo_order(plan)  # reject cyclic plans up front
    return plan


def decompose(question: str, chat: ChatBackend, ledger: CallLedger) -> DecompositionPlan:
    """LLM call 1: ask for a dependency-ordered sub-question plan.

    Malformed output is retried; after the retry budget the plan degrades
    to a single sub-question equal to the original question.
    """
    if not question or question.isspace():
        raise ValueError("question must be non-empty")
    prompt = prompts.fill(prompts.DECOMPOSE_PROMPT_TEMPLATE, question=question)
    messages = [ChatMessage("user", prompt)]
    for attempt in range(DECOMPOSE_RETRIES + 1):
        response = chat.chat(messages, temperature=0.0)
        ledger.record_chat("decompose", response.prompt_tokens, response.completion_tokens)
        try:
            return _validate_plan(response.text, question)
        except (json.JSONDecodeError, DecompositionError) as exc:
            logger.warning("decomposition attempt %d unusable: %s", attempt + 1, exc)
    logger.warning("falling back to a single-hop plan for %r", question)
    return DecompositionPlan(question, (SubQuestion(1, question, ()),))


def topo_order(plan: DecompositionPlan) -> list[SubQuestion]:
    """Dependency-respecting order; among ready nodes the smallest id
    runs first, which makes hop order deterministic."""
    by_id = {sub.id: sub for sub in plan.sub_questions}
    indegree = {sub.id: len(set(sub.depends_on)) for sub in plan.sub_questions}
    dependents: dict[int, list[int]] = {sub.id: [] for sub in plan.sub_questions}
    for sub in plan.sub_questions:
        for dep in set(sub.depends_on):
            dependents[dep].append(sub.id)
    ready = sorted(sub_id for sub_id, deg in indegree.items() if deg == 0)
    order: list[SubQuestion] = []
    while ready:
        current = ready.pop(0)
        order.append(by_id[current])
        changed = False
        for dependent in dependents[current]:
            indegree[dependent] -= 1
            if indegree[dependent] == 0:
                ready.append(dependent)
                changed = True
        if changed:
            ready.sort()
    if len(order) != len(plan.sub_questions):
        remaining = sorted(set(by_id) - {sub.id for sub in order})
        raise DecompositionError(f"dependency cycle among sub-questions {remaining}")
    return order


def _substitute(text: str, answers: Mapping[int, str]) -> str:
    def repl(match: re.Match) -> str:
        ref = int(match.group(1))
        if ref not in answers:
            raise QueryError(f"placeholder {{answer:{ref}}} references an unresolved sub-question")
        return answers[ref]

    return _PLACEHOLDER.sub(repl, text)


def ground_subquestion(
    sub: SubQuestion,
    parent_answers: Mapping[int, str],
    mode: Mode,
    rewriter: Rewriter,
    ledger: CallLedger,
) -> str:
    """Produce the retrieval-ready text for one hop.

    Placeholders substitute first. In full mode the rewriter grounds
    whatever still looks ambiguous; in no_rewriter mode parent answers
    are appended instead; retrieval_only uses the raw text untouched.
    """
    if mode is Mode.RETRIEVAL_ONLY:
        return sub.text
    for dep in sub.depends_on:
        if dep not in parent_answers:
            raise QueryError(f"sub-question {sub.id} scheduled before its parent {dep}")
    resolved = _substitute(sub.text, parent_answers)
    if not sub.depends_on:
        return resolved
    entities = [parent_answers[dep] for dep in sorted(set(sub.depends_on))]
    if mode is Mode.NO_REWRITER:
        return f"{resolved} {' '.join(entities)}"
    grounded = any(entity and entity in resolved for entity in entities)
    if grounded and not contains_pronoun(resolved):
        return resolved
    ledger.record_rewrite("rewrite")
    result = rewriter.rewrite(resolved, entities)
    rewritten = result.rewritten.strip()
    if not rewritten or not all(entity in rewritten for entity in entities):
        # rewriter signalled fallback (or dropped an entity): concatenate
        return f"{resolved} {' '.join(entities)}"
    return rewritten


def candidate_text(pair: QAPair) -> str:
    return f"Q: {pair.question} A: {pair.answer}"


def resolve_hop(
    sub: SubQuestion,
    resolved_text: str,
    kb: KnowledgeBase,
    index: VectorIndex,
    services: Services,
    k: int,
    ledger: CallLedger,
    mode: Mode,
) -> HopRecord:
    """Retrieve candidate pairs for one hop and extract its answer."""
    if len(index) == 0:
        raise QueryError("index is empty")
    ledger.record_embed("retrieve")
    results = search(index, resolved_text, k, services.embedder)
    retrieved = tuple((kb.pair(r.qa_id), r.score) for r in results)
    if not retrieved:
        raise QueryError(f"retrieval returned nothing for {resolved_text!r}")
    if mode is Mode.RETRIEVAL_ONLY:
        return HopRecord(sub.id, sub.text, resolved_text, retrieved, retrieved[0][0].answer, False)
    contexts = [candidate_text(pair) for pair, _ in retrieved]
    ledger.record_extract("extract")
    span = services.extractor.extract_span(resolved_text, contexts)
    answer = span.answer_text.strip()
    fallback = span.score < EXTRACTOR_SCORE_FLOOR or not answer
    if fallback:
        answer = retrieved[0][0].answer
    return HopRecord(sub.id, sub.text, resolved_text, retrieved, answer, fallback)


def _facts_block(retrieved: Sequence[tuple[QAPair, float]]) -> str:
    return "\n".join(f"- {candidate_text(pair)}" for pair, _ in retrieved)


def synthesize(
    question: str,
    evidence: EvidenceBundle,
    chat: ChatBackend,
    ledger: CallLedger,
) -> str:
    """LLM call 2: holistic answer over all hops and their evidence."""
    blocks = []
    for hop in evidence.hops:
        blocks.append(
            prompts.fill(
                prompts.SYNTHESIS_HOP_TEMPLATE,
                i=str(hop.sub_id),
                sub_question=hop.resolved_text,
                answer=hop.extracted_answer,
                facts=_facts_block(hop.retrieved),
            )
        )
    prompt = prompts.fill(
        prompts.SYNTHESIS_PROMPT_TEMPLATE, question=question, evidence="\n".join(blocks)
    )
    response = chat.chat([ChatMessage("user", prompt)], temperature=0.0)
    ledger.record_chat("synthesize", response.prompt_tokens, response.completion_tokens)
    return response.text.strip()


def _vanilla_query(
    question: str,
    kb: KnowledgeBase,
    index: VectorIndex,
    services: Services,
    k: int,
    ledger: CallLedger,
) -> QueryResult:
    ledger.record_embed("retrieve")
    results = search(index, question, k, services.embedder)
    retrieved = tuple((kb.pair(r.qa_id), r.score) for r in results)
    if not retrieved:
        raise QueryError(f"retrieval returned nothing for {question!r}")
    prompt = prompts.fill(
        prompts.VANILLA_PROMPT_TEMPLATE, question=question, facts=_facts_block(retrieved)
    )
    response = services.chat.chat([ChatMessage("user", prompt)], temperature=0.0)
    ledger.record_chat("synthesize", response.prompt_tokens, response.completion_tokens)
    plan = DecompositionPlan(question, (SubQuestion(1, question, ()),))
    hop = HopRecord(1, question, question, retrieved, retrieved[0][0].answer, False)
    return QueryResult(
        response.text.strip(), EvidenceBundle(plan, (hop,)), ledger, Mode.VANILLA_RAG
    )


def answer_query(
    question: str,
    mode: Mode,
    services: Services,
    kb: KnowledgeBase,
    index: VectorIndex,
    k: int = DEFAULT_TOP_K,
) -> QueryResult:
    """Answer one question end to end under the requested mode."""
    if not question or question.isspace():
        raise ValueError("question must be non-empty")
    mode = Mode(mode)
    ledger = CallLedger()
    try:
        if mode is Mode.VANILLA_RAG:
            return _vanilla_query(question, kb, index, services, k, ledger)
        plan = decompose(question, services.chat, ledger)
        answers: dict[int, str] = {}
        hops: list[HopRecord] = []
        for sub in topo_order(plan):
            resolved = ground_subquestion(sub, answers, mode, services.rewriter, ledger)
            hop = resolve_hop(sub, resolved, kb, index, services, k, ledger, mode)
            answers[sub.id] = hop.extracted_answer
            hops.append(hop)
        evidence = EvidenceBundle(plan, tuple(hops))
        answer = synthesize(question, evidence, services.chat, ledger)
        return QueryResult(answer, evidence, ledger, mode)
    except CompactRAGError as exc:
        raise QueryError(f"query failed for {question!r}: {exc}") from exc


def result_to_dict(result: QueryResult, include_evidence: bool = False) -> dict:
    """JSON-ready view of a QueryResult (CLI and eval serialization)."""
    out = {
        "question": result.evidence.plan.original,
        "answer": result.answer,
        "mode": result.mode.value,
        "ledger": result.ledger.to_dict(),
    }
    if include_evidence:
        out["evidence"] = {
            "plan": [
                {"id": s.id, "question": s.text, "depends_on": list(s.depends_on)}
                for s in result.evidence.plan.sub_questions
            ],
            "hops": [
                {
                    "sub_id": hop.sub_id,
                    "raw_text": hop.raw_text,
                    "resolved_text": hop.resolved_text,
                    "retrieved": [
                        {"qa_id": pair.qa_id, "question": pair.question, "answer": pair.answer, "score": score}
                        for pair, score in hop.retrieved
                    ],
                    "extracted_answer": hop.extracted_answer,
                    "fallback_used": hop.fallback_used,
                }
                for hop in result.evidence.hops
            ],
        }
    return out
