"""Offline stage: corpus in, atomic QA knowledge base out.

Each passage is annotated for entities, sent through the reader prompt,
and the reader's JSON output is parsed and validated. Invalid pairs are
kept with valid=False for auditability; duplicate questions within a
passage keep their first occurrence.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

from compactrag import prompts
from compactrag.backends.base import ChatBackend, ChatMessage, EntityAnnotator, EntityMention
from compactrag.errors import (
    ConfigError,
    CorpusFormatError,
    FileFormatError,
    KBBuildError,
    ReaderOutputError,
)

logger = logging.getLogger(__name__)

KB_FORMAT_VERSION = "1"
READER_RETRIES = 2
QUESTION_WORDS = ("who", "what", "when", "where", "which", "why", "how")
SOFT_QUESTION_WORD_LIMIT = 12


@dataclass(frozen=True)
class Passage:
    id: str
    title: str
    text: str


@dataclass(frozen=True)
class AtomicFact:
    passage_id: str
    statement: str


@dataclass(frozen=True)
class QAPair:
    qa_id: str
    passage_id: str
    question: str
    answer: str
    entities: tuple[str, ...]
    valid: bool


@dataclass(frozen=True)
class QADraft:
    question: str
    answer: str


@dataclass(eq=True)
class KnowledgeBase:
    pairs: list[QAPair] = field(default_factory=list)
    facts: list[AtomicFact] = field(default_factory=list)
    source_corpus_id: str = ""
    offline_token_cost: int = 0

    @cached_property
    def pair_map(self) -> dict[str, QAPair]:
        return {p.qa_id: p for p in self.pairs}

    def pair(self, qa_id: str) -> QAPair:
        try:
            return self.pair_map[qa_id]
        except KeyError:
            raise ConfigError(
                f"index references unknown qa_id {qa_id!r}; KB and index do not match"
            ) from None


def load_corpus(path: str) -> list[Passage]:
    """Parse a JSONL corpus ({"id","title","text"} per line)."""
    passages: list[Passage] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"malformed JSON at line {lineno}: {exc}") from exc
            if not isinstance(record, dict):
                raise CorpusFormatError(f"expected an object at line {lineno}")
            missing = [key for key in ("id", "title", "text") if key not in record]
            if missing:
                raise CorpusFormatError(f"missing {missing} at line {lineno}")
            pid = str(record["id"])
            if not record["text"]:
                raise CorpusFormatError(f"empty passage text at line {lineno}")
            if pid in seen:
                raise CorpusFormatError(f"duplicate passage id at line {lineno}")
            seen.add(pid)
            passages.append(Passage(pid, str(record["title"]), str(record["text"])))
    return passages


def build_reader_prompt(passage: Passage, mentions: Sequence[EntityMention]) -> str:
    """Instantiate the reader template with the passage and its entities."""
    entity_info = ", ".join(f"{m.surface} ({m.label})" for m in mentions) or "(none)"
    return prompts.fill(
        prompts.READER_PROMPT_TEMPLATE, passage=passage.text, entity_info=entity_info
    )


_FENCE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)


def parse_reader_output(raw: str) -> tuple[list[str], list[QADraft]]:
    """Extract facts and QA drafts from reader output.

    The first fenced code block is parsed when present, otherwise the
    whole body. Requires a JSON object with keys atomic_facts and qa.
    """
    fenced = _FENCE.search(raw)
    body = fenced.group(1) if fenced else raw
    try:
        obj = json.loads(body)
    except json.JSONDecodeError as exc:
        raise ReaderOutputError(f"reader output is not JSON: {exc}") from exc
    if not isinstance(obj, dict) or "atomic_facts" not in obj or "qa" not in obj:
        raise ReaderOutputError("reader output must be an object with atomic_facts and qa")
    facts_raw, qa_raw = obj["atomic_facts"], obj["qa"]
    if not isinstance(facts_raw, list) or not isinstance(qa_raw, list):
        raise ReaderOutputError("atomic_facts and qa must be arrays")
    facts = []
    for item in facts_raw:
        if not isinstance(item, str) or not item.strip():
            raise ReaderOutputError("atomic_facts entries must be non-empty strings")
        facts.append(item)
    drafts = []
    for item in qa_raw:
        if not isinstance(item, dict) or "question" not in item or "answer" not in item:
            raise ReaderOutputError("qa entries must be objects with question and answer")
        drafts.append(QADraft(str(item["question"]), str(item["answer"])))
    return facts, drafts


def question_shaped(question: str) -> bool:
    stripped = question.strip()
    if not stripped:
        return False
    if stripped.endswith("?"):
        return True
    return stripped.split()[0].lower().rstrip(",") in QUESTION_WORDS


def validate_pair(
    draft: QADraft,
    passage: Passage,
    qa_id: str,
    entities: Sequence[str] = (),
) -> QAPair:
    """Promote a draft to a QAPair; valid iff the answer slices verbatim
    out of the passage and the question looks like a question. Questions
    over the soft word limit are kept but logged."""
    valid = bool(draft.answer) and draft.answer in passage.text and question_shaped(draft.question)
    if len(draft.question.split()) > SOFT_QUESTION_WORD_LIMIT:
        logger.warning(
            "question longer than %d words in passage %s: %r",
            SOFT_QUESTION_WORD_LIMIT,
            passage.id,
            draft.question,
        )
    return QAPair(qa_id, passage.id, draft.question, draft.answer, tuple(entities), valid)


def _normalize_question(question: str) -> str:
    return " ".join(question.split()).casefold()


def _entities_for_pair(draft: QADraft, mentions: Sequence[EntityMention]) -> list[str]:
    combined = f"{draft.question} {draft.answer}"
    out: list[str] = []
    for mention in mentions:
        if mention.surface in combined and mention.surface not in out:
            out.append(mention.surface)
    return out


@dataclass
class _PassageResult:
    passage: Passage
    facts: list[str]
    drafts: list[QADraft]
    mentions: list[EntityMention]
    tokens: int
    skipped: bool
    retries: int


def _read_passage(
    passage: Passage, reader: ChatBackend, annotator: EntityAnnotator
) -> _PassageResult:
    mentions = annotator.annotate_entities(passage.text)
    prompt = build_reader_prompt(passage, mentions)
    tokens = 0
    last_error: ReaderOutputError | None = None
    for attempt in range(READER_RETRIES + 1):
        response = reader.chat([ChatMessage("user", prompt)], temperature=0.0)
        tokens += response.prompt_tokens + response.completion_tokens
        try:
            facts, drafts = parse_reader_output(response.text)
        except ReaderOutputError as exc:
            last_error = exc
            logger.warning("passage %s: unparseable reader output (attempt %d)", passage.id, attempt + 1)
            continue
        if attempt:
            logger.info("passage %s: parsed after %d retries", passage.id, attempt)
        return _PassageResult(passage, facts, drafts, mentions, tokens, False, attempt)
    logger.warning("passage %s skipped after %d attempts: %s", passage.id, READER_RETRIES + 1, last_error)
    return _PassageResult(passage, [], [], mentions, tokens, True, READER_RETRIES)


def build_kb(
    corpus: Sequence[Passage],
    reader: ChatBackend,
    annotator: EntityAnnotator,
    corpus_id: str = "corpus",
    concurrency: int = 1,
) -> KnowledgeBase:
    """Run the reader over every passage and assemble the KB.

    Output order is corpus order, then generation order within a passage.
    Passages whose output stays unparseable after retries are skipped; if
    more than half get skipped the build aborts.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    if concurrency == 1:
        results = [_read_passage(p, reader, annotator) for p in corpus]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            results = list(pool.map(lambda p: _read_passage(p, reader, annotator), corpus))

    kb = KnowledgeBase(source_corpus_id=corpus_id)
    skipped = 0
    for result in results:
        kb.offline_token_cost += result.tokens
        if result.skipped:
            skipped += 1
            continue
        kb.facts.extend(AtomicFact(result.passage.id, fact) for fact in result.facts)
        seen: set[str] = set()
        kept = 0
        for draft in result.drafts:
            key = _normalize_question(draft.question)
            if key in seen:
                logger.info("passage %s: dropped duplicate question %r", result.passage.id, draft.question)
                continue
            seen.add(key)
            kept += 1
            qa_id = f"{result.passage.id}:q{kept}"
            entities = _entities_for_pair(draft, result.mentions)
            kb.pairs.append(validate_pair(draft, result.passage, qa_id, entities))
    if corpus and skipped * 2 > len(corpus):
        raise KBBuildError(
            f"aborting: {skipped}/{len(corpus)} passages skipped (reader output unparseable)"
        )
    if skipped:
        logger.warning("KB built with %d/%d passages skipped", skipped, len(corpus))
    return kb


def save_kb(kb: KnowledgeBase, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {
            "version": KB_FORMAT_VERSION,
            "corpus_id": kb.source_corpus_id,
            "offline_token_cost": kb.offline_token_cost,
        }
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for fact in kb.facts:
            record = {"kind": "fact", "passage_id": fact.passage_id, "statement": fact.statement}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        for pair in kb.pairs:
            record = {
                "kind": "qa",
                "qa_id": pair.qa_id,
                "passage_id": pair.passage_id,
                "question": pair.question,
                "answer": pair.answer,
                "entities": list(pair.entities),
                "valid": pair.valid,
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_kb(path: str) -> KnowledgeBase:
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise FileFormatError(f"{path}: missing KB header")
        header = json.loads(header_line)
        version = header.get("version")
        if version != KB_FORMAT_VERSION:
            raise FileFormatError(
                f"{path}: unsupported KB version {version!r}, expected {KB_FORMAT_VERSION!r}"
            )
        kb = KnowledgeBase(
            source_corpus_id=header["corpus_id"],
            offline_token_cost=int(header["offline_token_cost"]),
        )
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            record = json.loads(line)
            kind = record.get("kind")
            if kind == "fact":
                kb.facts.append(AtomicFact(record["passage_id"], record["statement"]))
            elif kind == "qa":
                kb.pairs.append(
                    QAPair(
                        record["qa_id"],
                        record["passage_id"],
                        record["question"],
                        record["answer"],
                        tuple(record["entities"]),
                        bool(record["valid"]),
                    )
                )
            else:
                raise FileFormatError(f"{path}: unknown record kind {kind!r} at line {lineno}")
    return kb
