"""Seeded generator for synthetic multi-hop chains.

Builds a KB of single-token entity relations plus chain questions in the
mock decomposer's ``" >> "`` convention, with a mix of placeholder-style
and pronoun-style hops. Everything derives from one seed.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from compactrag.kbgen import KnowledgeBase, QAPair

RELATIONS = [
    ("What does {e} point to?", "What does it point to?"),
    ("Who leads {e}?", "Who leads it?"),
    ("Where is {e} located?", "Where is it located?"),
    ("Who founded {e}?", "Who founded it?"),
]


@dataclass(frozen=True)
class SyntheticQuestion:
    question: str
    hops: int
    gold_answer: str


@dataclass
class SyntheticSuite:
    kb: KnowledgeBase
    questions: list[SyntheticQuestion]


def build_suite(
    seed: int = 0,
    n_chains: int = 40,
    max_hops: int = 4,
    n_questions: int = 200,
) -> SyntheticSuite:
    rng = random.Random(seed)
    kb = KnowledgeBase(source_corpus_id="synthetic")
    chains: list[list[tuple[str, str, str]]] = []  # (question, pronoun_q, answer)
    entity_counter = 0

    def fresh_entity() -> str:
        nonlocal entity_counter
        entity_counter += 1
        return f"ent{entity_counter:04d}x"

    for c in range(n_chains):
        entities = [fresh_entity() for _ in range(max_hops + 1)]
        chain = []
        for hop in range(max_hops):
            explicit, pronoun = rng.choice(RELATIONS)
            question = explicit.format(e=entities[hop])
            chain.append((question, pronoun, entities[hop + 1]))
            kb.pairs.append(
                QAPair(f"c{c}:q{hop + 1}", f"c{c}", question, entities[hop + 1], (), True)
            )
        chains.append(chain)

    questions = []
    for i in range(n_questions):
        chain = chains[i % n_chains]
        hops = 1 + i % max_hops
        parts = [chain[0][0]]
        for hop in range(1, hops):
            explicit_q, pronoun_q, _ = chain[hop]
            if rng.random() < 0.3:
                # pronoun-style hop: dependency marker, no placeholder
                parts.append(f"{{after:{hop}}} {pronoun_q}")
            else:
                head_entity = chain[hop - 1][2]
                parts.append(explicit_q.replace(head_entity, f"{{answer:{hop}}}"))
        questions.append(SyntheticQuestion(" >> ".join(parts), hops, chain[hops - 1][2]))
    return SyntheticSuite(kb, questions)
