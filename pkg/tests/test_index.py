"""Index behavior: joint encoding, exact top-k with tie-breaking,
persistence round-trips."""

from __future__ import annotations

import math
import random

import pytest

from compactrag.backends.mock import MockEmbedder
from compactrag.errors import ConfigError, FileFormatError
from compactrag.index import (
    VectorIndex,
    build_index,
    encode_pair,
    load_index,
    pair_text,
    save_index,
    search,
)
from compactrag.kbgen import KnowledgeBase, QAPair
from tests.conftest import make_chain_kb


def _pair(i: int, question: str, answer: str, valid: bool = True) -> QAPair:
    return QAPair(f"p{i}:q1", f"p{i}", question, answer, (), valid)


class TestEncodePair:
    def test_encodes_question_space_answer(self, embedder):
        pair = _pair(1, "Who directed Lilli's Marriage?", "directed by Jaap Speyer")
        assert pair_text(pair) == "Who directed Lilli's Marriage? directed by Jaap Speyer"
        encoded = encode_pair(pair, embedder)
        [raw] = embedder.embed([pair_text(pair)])
        norm = math.sqrt(sum(x * x for x in raw.values))
        assert encoded == tuple(x / norm for x in raw.values)

    def test_identical_pairs_identical_vectors(self, embedder):
        a = encode_pair(_pair(1, "Who did x?", "y"), embedder)
        b = encode_pair(_pair(2, "Who did x?", "y"), embedder)
        assert a == b

    def test_normalized_to_unit_length_on_random_pairs(self, embedder):
        rng = random.Random(3)
        words = ["tower", "film", "city", "river", "bridge", "actor"]
        for i in range(100):
            question = " ".join(rng.choices(words, k=4)) + "?"
            answer = " ".join(rng.choices(words, k=2))
            vec = encode_pair(_pair(i, question, answer), embedder)
            assert math.sqrt(sum(x * x for x in vec)) == pytest.approx(1.0, abs=1e-6)


class TestBuildIndex:
    def test_indexes_only_valid_pairs(self, embedder):
        kb = KnowledgeBase(source_corpus_id="c")
        kb.pairs = [_pair(i, f"Who is number {i}?", f"answer{i}") for i in range(1, 5)]
        kb.pairs.append(_pair(5, "broken?", "nope", valid=False))
        index = build_index(kb, embedder)
        assert len(index) == 4
        assert [e.qa_id for e in index.entries] == [p.qa_id for p in kb.pairs[:4]]

    def test_no_valid_pairs_is_an_error(self, embedder):
        kb = KnowledgeBase(source_corpus_id="c")
        kb.pairs = [_pair(1, "q?", "a", valid=False)]
        with pytest.raises(ConfigError, match="no valid pairs"):
            build_index(kb, embedder)

    def test_order_stable_across_batch_sizes(self, embedder):
        kb = KnowledgeBase(source_corpus_id="c")
        kb.pairs = [_pair(i, f"Which item is {i}?", f"thing{i}") for i in range(1, 30)]
        a = build_index(kb, embedder, batch_size=8)
        b = build_index(kb, embedder, batch_size=3)
        assert [e.qa_id for e in a.entries] == [e.qa_id for e in b.entries]
        assert [e.vector for e in a.entries] == [e.vector for e in b.entries]


class TestSearch:
    def test_self_retrieval_scores_one(self, chain_kb, chain_index, embedder):
        query = pair_text(chain_kb.pairs[0])
        [top] = search(chain_index, query, 1, embedder)
        assert top.qa_id == chain_kb.pairs[0].qa_id
        assert top.score == pytest.approx(1.0, abs=1e-6)

    def test_k_capped_by_index_size(self, chain_index, embedder):
        results = search(chain_index, "anything at all", 10, embedder)
        assert len(results) == len(chain_index)

    def test_empty_query_rejected(self, chain_index, embedder):
        with pytest.raises(ValueError):
            search(chain_index, "   ", 5, embedder)

    def test_dim_mismatch_is_config_error(self, chain_index):
        with pytest.raises(ConfigError):
            search(chain_index, "hello", 1, MockEmbedder(dim=8, seed=0))

    def test_matches_full_sort_oracle_with_ties(self, embedder):
        rng = random.Random(19)
        words = ["tower", "film", "city", "river", "bridge", "actor", "award", "song"]
        kb = KnowledgeBase(source_corpus_id="c")
        for i in range(1, 201):
            question = " ".join(rng.choices(words, k=4)) + "?"
            kb.pairs.append(_pair(i, question, rng.choice(words)))
        # plant exact duplicates: identical text embeds identically
        for i in range(201, 206):
            source = kb.pairs[i - 201]
            kb.pairs.append(QAPair(f"p{i}:q1", f"p{i}", source.question, source.answer, (), True))
        index = build_index(kb, embedder)
        for _ in range(50):
            query = " ".join(rng.choices(words, k=3))
            got = [(r.qa_id, r.score) for r in search(index, query, 5, embedder)]
            # oracle: independent dot products + full stable sort
            [qv] = embedder.embed([query])
            qnorm = math.sqrt(sum(x * x for x in qv.values))
            qvec = [x / qnorm for x in qv.values]
            scores = []
            for entry in index.entries:
                acc = 0.0
                for a, b in zip(entry.vector, qvec):
                    acc += a * b
                scores.append(acc)
            order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:5]
            expected = [(index.entries[i].qa_id, scores[i]) for i in order]
            assert got == expected

    def test_deterministic_across_runs(self, chain_index, embedder):
        a = search(chain_index, "who directed the film", 3, embedder)
        b = search(chain_index, "who directed the film", 3, embedder)
        assert a == b


class TestPersistence:
    def test_round_trip_preserves_everything(self, chain_kb, chain_index, tmp_path):
        path = tmp_path / "index.jsonl"
        save_index(chain_index, str(path))
        loaded = load_index(str(path))
        assert loaded.dim == chain_index.dim
        assert loaded.kb_ref == chain_index.kb_ref
        assert loaded.entries == chain_index.entries

    def test_save_is_canonical(self, chain_index, tmp_path):
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        save_index(chain_index, str(first))
        save_index(load_index(str(first)), str(second))
        assert first.read_bytes() == second.read_bytes()

    def test_version_mismatch_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"version": "v9", "dim": 2, "kb_ref": "x"}\n', encoding="utf-8")
        with pytest.raises(FileFormatError, match="version"):
            load_index(str(path))

    def test_vector_round_trip_precision(self, embedder, tmp_path):
        kb = make_chain_kb(("What is pi times e?", "a transcendental number"))
        index = build_index(kb, embedder)
        save_index(index, str(tmp_path / "i.jsonl"))
        loaded = load_index(str(tmp_path / "i.jsonl"))
        for orig, rt in zip(index.entries, loaded.entries):
            for a, b in zip(orig.vector, rt.vector):
                assert a == b  # json float round-trip is exact


class TestVectorIndexInvariants:
    def test_mixed_dims_rejected(self):
        from compactrag.index import IndexEntry

        with pytest.raises(ConfigError):
            VectorIndex([IndexEntry("a", (1.0,)), IndexEntry("b", (1.0, 0.0))], 1, "kb")

    def test_duplicate_ids_rejected(self):
        from compactrag.index import IndexEntry

        with pytest.raises(ConfigError):
            VectorIndex([IndexEntry("a", (1.0,)), IndexEntry("a", (0.5,))], 1, "kb")
