"""Shared fixtures: the worked-example passage, mock service bundles,
and small synthetic knowledge bases."""

from __future__ import annotations

import json

import pytest

from compactrag.backends.entities import RuleBasedAnnotator
from compactrag.backends.mock import (
    MockChatModel,
    MockEmbedder,
    MockRewriter,
    MockSpanExtractor,
    PipelineMockChat,
)
from compactrag.index import build_index
from compactrag.kbgen import KnowledgeBase, Passage, QAPair
from compactrag.pipeline import Services

LILLI_TEXT = (
    "Lilli's Marriage (German: Lillis Ehe) is a 1919 German silent film directed by "
    'Jaap Speyer. It is a sequel to the film "Lilli", and premiered at the Marmorhaus '
    "in Berlin. The film's art direction was by Hans Dreier."
)

LILLI_READER_OUTPUT = (
    "```json\n"
    + json.dumps(
        {
            "atomic_facts": [
                "Lilli's Marriage is a 1919 German silent film",
                "Lilli's Marriage is also known as Lillis Ehe in German",
                "Jaap Speyer directed Lilli's Marriage",
                "Lilli's Marriage is a sequel to the film Lilli",
                "Lilli's Marriage premiered at the Marmorhaus in Berlin",
                "Hans Dreier was responsible for the art direction of Lilli's Marriage",
                "Lilli's Marriage was released in 1919",
            ],
            "qa": [
                {"question": "What is Lilli's Marriage?", "answer": "a 1919 German silent film"},
                {"question": "Who directed Lilli's Marriage?", "answer": "directed by Jaap Speyer"},
                {
                    "question": "Which film is Lilli's Marriage a sequel to?",
                    "answer": 'It is a sequel to the film "Lilli"',
                },
                {
                    "question": "Where did Lilli's Marriage premiere?",
                    "answer": "premiered at the Marmorhaus in Berlin",
                },
                {
                    "question": "Who was responsible for the art direction of Lilli's Marriage?",
                    "answer": " Hans Dreier",
                },
            ],
        },
        ensure_ascii=False,
        indent=2,
    )
    + "\n```"
)


@pytest.fixture
def lilli_passage() -> Passage:
    return Passage("lilli-1", "Lilli's Marriage", LILLI_TEXT)


@pytest.fixture
def lilli_reader() -> MockChatModel:
    return MockChatModel(default_response=LILLI_READER_OUTPUT)


@pytest.fixture
def annotator() -> RuleBasedAnnotator:
    return RuleBasedAnnotator()


@pytest.fixture
def embedder() -> MockEmbedder:
    return MockEmbedder(dim=32, seed=0)


@pytest.fixture
def mock_services(embedder) -> Services:
    return Services(
        chat=PipelineMockChat(),
        embedder=embedder,
        extractor=MockSpanExtractor(),
        rewriter=MockRewriter(),
    )


def make_chain_kb(*pairs: tuple[str, str]) -> KnowledgeBase:
    """KB from (question, answer) tuples, one passage per pair."""
    kb = KnowledgeBase(source_corpus_id="fixture")
    for i, (question, answer) in enumerate(pairs, start=1):
        kb.pairs.append(QAPair(f"p{i}:q1", f"p{i}", question, answer, (), True))
    return kb


@pytest.fixture
def chain_kb() -> KnowledgeBase:
    return make_chain_kb(
        ("Who directed widgetfilm?", "director77"),
        ("Where was director77 born?", "rivertown"),
        ("What is the height of towerx?", "324 meters"),
        ("Which city hosts the stonearena?", "stonecity"),
    )


@pytest.fixture
def chain_index(chain_kb, embedder):
    return build_index(chain_kb, embedder)
