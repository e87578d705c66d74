"""Online stage: decomposition, ordering, grounding, hop resolution,
synthesis, and the per-mode ledger invariants."""

from __future__ import annotations

import json

import pytest

from compactrag.backends.base import RewriteResult, SpanResult
from compactrag.backends.mock import (
    MockChatModel,
    MockEmbedder,
    MockRewriter,
    MockSpanExtractor,
    PipelineMockChat,
)
from compactrag.errors import DecompositionError, QueryError
from compactrag.index import build_index
from compactrag.ledger import CallLedger
from compactrag.pipeline import (
    DecompositionPlan,
    EvidenceBundle,
    HopRecord,
    Mode,
    Services,
    SubQuestion,
    answer_query,
    decompose,
    ground_subquestion,
    resolve_hop,
    synthesize,
    topo_order,
)
from tests.conftest import make_chain_kb


def plan_of(*subs: SubQuestion, original: str = "q?") -> DecompositionPlan:
    return DecompositionPlan(original, tuple(subs))


class TestDecompose:
    def test_penicillin_style_chain(self):
        scripted = json.dumps(
            [
                {"id": 1, "question": "Who discovered penicillin?", "depends_on": []},
                {"id": 2, "question": "Where was {answer:1} born?", "depends_on": [1]},
            ]
        )
        ledger = CallLedger()
        plan = decompose(
            "Where was the scientist who discovered penicillin born?",
            MockChatModel(default_response=scripted),
            ledger,
        )
        assert [s.text for s in plan.sub_questions] == [
            "Who discovered penicillin?",
            "Where was {answer:1} born?",
        ]
        assert plan.sub_questions[1].depends_on == (1,)
        assert ledger.chat_calls == 1

    def test_single_fact_question_one_node(self):
        ledger = CallLedger()
        plan = decompose("What is towerx?", PipelineMockChat(), ledger)
        assert len(plan.sub_questions) == 1
        assert plan.sub_questions[0].depends_on == ()

    def test_scripted_three_node_plan_parsed(self):
        fixture = [
            {"id": 1, "question": "Who wrote bookx?", "depends_on": []},
            {"id": 2, "question": "Who painted artx?", "depends_on": []},
            {"id": 3, "question": "Did {answer:1} meet {answer:2}?", "depends_on": [1, 2]},
        ]
        plan = decompose("q?", MockChatModel(default_response=json.dumps(fixture)), CallLedger())
        assert [(s.id, s.depends_on) for s in plan.sub_questions] == [(1, ()), (2, ()), (3, (1, 2))]

    def test_malformed_output_falls_back_to_single_hop(self, caplog):
        ledger = CallLedger()
        with caplog.at_level("WARNING"):
            plan = decompose("Who is x?", MockChatModel(default_response="not json"), ledger)
        assert len(plan.sub_questions) == 1
        assert plan.sub_questions[0].text == "Who is x?"
        assert ledger.chat_calls == 3  # initial + 2 retries, all ledgered
        assert any("falling back" in r.message for r in caplog.records)

    def test_fenced_plan_accepted(self):
        fenced = '```json\n[{"id": 1, "question": "Who?", "depends_on": []}]\n```'
        plan = decompose("Who?", MockChatModel(default_response=fenced), CallLedger())
        assert plan.sub_questions[0].text == "Who?"

    def test_cyclic_plan_rejected_then_fallback(self):
        cyclic = json.dumps(
            [
                {"id": 1, "question": "a?", "depends_on": [2]},
                {"id": 2, "question": "b?", "depends_on": [1]},
            ]
        )
        plan = decompose("q?", MockChatModel(default_response=cyclic), CallLedger())
        assert len(plan.sub_questions) == 1


class TestTopoOrder:
    def test_chain(self):
        plan = plan_of(
            SubQuestion(1, "a?", ()), SubQuestion(2, "b?", (1,)), SubQuestion(3, "c?", (2,))
        )
        assert [s.id for s in topo_order(plan)] == [1, 2, 3]

    def test_diamond_smallest_ready_id_first(self):
        plan = plan_of(
            SubQuestion(1, "a?", ()),
            SubQuestion(2, "b?", (1,)),
            SubQuestion(3, "c?", (1,)),
            SubQuestion(4, "d?", (2, 3)),
        )
        assert [s.id for s in topo_order(plan)] == [1, 2, 3, 4]

    def test_cycle_names_members(self):
        plan = plan_of(SubQuestion(1, "a?", (2,)), SubQuestion(2, "b?", (1,)))
        with pytest.raises(DecompositionError, match=r"\[1, 2\]"):
            topo_order(plan)

    def test_independent_nodes_ordered_by_id(self):
        plan = plan_of(SubQuestion(3, "c?", ()), SubQuestion(1, "a?", ()), SubQuestion(2, "b?", ()))
        assert [s.id for s in topo_order(plan)] == [1, 2, 3]


class TestGroundSubquestion:
    def test_full_mode_einstein_fixture(self):
        ledger = CallLedger()
        text = ground_subquestion(
            SubQuestion(2, "Where was he born?", (1,)),
            {1: "Albert Einstein"},
            Mode.FULL,
            MockRewriter(),
            ledger,
        )
        assert text == "Where was Albert Einstein born?"
        assert ledger.rewriter_calls == 1

    def test_no_deps_untouched_no_rewriter(self):
        ledger = CallLedger()
        text = ground_subquestion(
            SubQuestion(1, "Who discovered penicillin?", ()), {}, Mode.FULL, MockRewriter(), ledger
        )
        assert text == "Who discovered penicillin?"
        assert ledger.rewriter_calls == 0

    def test_no_rewriter_mode_appends_answers(self):
        ledger = CallLedger()
        text = ground_subquestion(
            SubQuestion(2, "Where was he born?", (1,)),
            {1: "Albert Einstein"},
            Mode.NO_REWRITER,
            MockRewriter(),
            ledger,
        )
        assert text == "Where was he born? Albert Einstein"
        assert ledger.rewriter_calls == 0

    def test_placeholder_substitution_skips_rewriter_when_grounded(self):
        ledger = CallLedger()
        text = ground_subquestion(
            SubQuestion(2, "Where was {answer:1} born?", (1,)),
            {1: "Albert Einstein"},
            Mode.FULL,
            MockRewriter(),
            ledger,
        )
        assert text == "Where was Albert Einstein born?"
        assert ledger.rewriter_calls == 0

    def test_retrieval_only_returns_raw_text(self):
        ledger = CallLedger()
        text = ground_subquestion(
            SubQuestion(2, "Where was {answer:1} born?", (1,)),
            {1: "Albert Einstein"},
            Mode.RETRIEVAL_ONLY,
            MockRewriter(),
            ledger,
        )
        assert text == "Where was {answer:1} born?"
        assert ledger.rewriter_calls == 0

    def test_missing_parent_is_scheduling_error(self):
        with pytest.raises(QueryError, match="parent"):
            ground_subquestion(
                SubQuestion(2, "Where was he born?", (1,)), {}, Mode.FULL, MockRewriter(), CallLedger()
            )

    def test_rewriter_fallback_concatenates(self):
        class EmptyRewriter:
            def rewrite(self, question, entities):
                return RewriteResult("")

        ledger = CallLedger()
        text = ground_subquestion(
            SubQuestion(2, "Where was he born?", (1,)),
            {1: "Albert Einstein"},
            Mode.FULL,
            EmptyRewriter(),
            ledger,
        )
        assert text == "Where was he born? Albert Einstein"
        assert ledger.rewriter_calls == 1

    def test_multi_parent_entities_in_id_order(self):
        calls = []

        class SpyRewriter:
            def rewrite(self, question, entities):
                calls.append(list(entities))
                return RewriteResult(f"{question} {' '.join(entities)}")

        ground_subquestion(
            SubQuestion(3, "Did they ever meet?", (2, 1)),
            {1: "Ada", 2: "Charles"},
            Mode.FULL,
            SpyRewriter(),
            CallLedger(),
        )
        assert calls == [["Ada", "Charles"]]


class TestResolveHop:
    def test_eiffel_fixture_extracts_france(self, embedder):
        kb = make_chain_kb(
            ("Where is the Eiffel Tower situated?", "Paris, France"),
            ("What is the height of the Eiffel Tower?", "324 meters"),
            ("Which city hosts the Colosseum?", "Rome, Italy"),
        )
        index = build_index(kb, embedder)

        class TrainedStyleExtractor:
            """Stub with the learned extractor's behavior on this fixture."""

            def extract_span(self, question, contexts):
                for i, context in enumerate(contexts):
                    tokens = context.split()
                    if "France" in tokens:
                        pos = tokens.index("France")
                        return SpanResult("France", i, pos, pos, 0.95)
                return SpanResult(contexts[0].split()[-1], 0, len(contexts[0].split()) - 1,
                                  len(contexts[0].split()) - 1, 0.0)

        services = Services(PipelineMockChat(), embedder, TrainedStyleExtractor(), MockRewriter())
        hop = resolve_hop(
            SubQuestion(1, "Which country is the Eiffel Tower located in?", ()),
            "Which country is the Eiffel Tower located in?",
            kb,
            index,
            services,
            3,
            CallLedger(),
            Mode.FULL,
        )
        assert hop.extracted_answer == "France"
        assert not hop.fallback_used

    def test_k1_single_pair_index(self, embedder):
        kb = make_chain_kb(("Who made thingy?", "makerperson"))
        index = build_index(kb, embedder)
        services = Services(PipelineMockChat(), embedder, MockSpanExtractor(), MockRewriter())
        hop = resolve_hop(
            SubQuestion(1, "Who made thingy?", ()),
            "Who made thingy?",
            kb,
            index,
            services,
            1,
            CallLedger(),
            Mode.FULL,
        )
        assert len(hop.retrieved) == 1
        assert hop.retrieved[0][0].qa_id == kb.pairs[0].qa_id

    def test_zero_score_extractor_falls_back_to_top1(self, chain_kb, chain_index, embedder):
        class ZeroExtractor:
            def extract_span(self, question, contexts):
                return SpanResult(contexts[0].split()[-1], 0, len(contexts[0].split()) - 1,
                                  len(contexts[0].split()) - 1, 0.0)

        services = Services(PipelineMockChat(), embedder, ZeroExtractor(), MockRewriter())
        ledger = CallLedger()
        hop = resolve_hop(
            SubQuestion(1, "Who directed widgetfilm?", ()),
            "Who directed widgetfilm?",
            chain_kb,
            chain_index,
            services,
            2,
            ledger,
            Mode.FULL,
        )
        assert hop.fallback_used
        assert hop.extracted_answer == hop.retrieved[0][0].answer
        assert ledger.extractor_calls == 1

    def test_retrieval_only_skips_extractor(self, chain_kb, chain_index, embedder):
        services = Services(PipelineMockChat(), embedder, MockSpanExtractor(), MockRewriter())
        ledger = CallLedger()
        hop = resolve_hop(
            SubQuestion(1, "Who directed widgetfilm?", ()),
            "Who directed widgetfilm?",
            chain_kb,
            chain_index,
            services,
            2,
            ledger,
            Mode.RETRIEVAL_ONLY,
        )
        assert ledger.extractor_calls == 0
        assert hop.extracted_answer == hop.retrieved[0][0].answer
        assert not hop.fallback_used

    def test_retrieved_sorted_by_score(self, chain_kb, chain_index, embedder):
        services = Services(PipelineMockChat(), embedder, MockSpanExtractor(), MockRewriter())
        hop = resolve_hop(
            SubQuestion(1, "Who directed widgetfilm?", ()),
            "Who directed widgetfilm?",
            chain_kb,
            chain_index,
            services,
            4,
            CallLedger(),
            Mode.FULL,
        )
        scores = [score for _, score in hop.retrieved]
        assert scores == sorted(scores, reverse=True)


class TestSynthesize:
    def _bundle(self, chain_kb) -> EvidenceBundle:
        plan = plan_of(
            SubQuestion(1, "Who directed widgetfilm?", ()),
            SubQuestion(2, "Where was {answer:1} born?", (1,)),
            original="Where was the director of widgetfilm born?",
        )
        hops = (
            HopRecord(1, "Who directed widgetfilm?", "Who directed widgetfilm?",
                      ((chain_kb.pairs[0], 0.9),), "zephyrone", False),
            HopRecord(2, "Where was {answer:1} born?", "Where was zephyrone born?",
                      ((chain_kb.pairs[1], 0.8),), "quasartwo", False),
        )
        return EvidenceBundle(plan, hops)

    def test_passthrough_answer(self, chain_kb):
        bundle = self._bundle(chain_kb)
        chat = MockChatModel(default_response="Scotland")
        answer = synthesize("Where was the director born?", bundle, chat, CallLedger())
        assert answer == "Scotland"

    def test_prompt_contains_each_sub_answer_exactly_once(self, chain_kb):
        # two independent hops: nothing leaks between sub-questions, so
        # each intermediate answer must show up exactly once
        plan = plan_of(
            SubQuestion(1, "Who directed widgetfilm?", ()),
            SubQuestion(2, "What is the height of towerx?", ()),
            original="Is the director of widgetfilm taller than towerx?",
        )
        bundle = EvidenceBundle(
            plan,
            (
                HopRecord(1, plan.sub_questions[0].text, plan.sub_questions[0].text,
                          ((chain_kb.pairs[0], 0.9),), "zephyrone", False),
                HopRecord(2, plan.sub_questions[1].text, plan.sub_questions[1].text,
                          ((chain_kb.pairs[2], 0.8),), "quasartwo", False),
            ),
        )
        captured = {}

        def grab(messages):
            captured["prompt"] = messages[-1].content
            return "done"

        synthesize(plan.original, bundle, MockChatModel(responder=grab), CallLedger())
        prompt = captured["prompt"]
        assert prompt.count("zephyrone") == 1
        assert prompt.count("quasartwo") == 1
        # every retrieved pair text is present
        assert "Q: Who directed widgetfilm? A: director77" in prompt
        assert "Q: What is the height of towerx? A: 324 meters" in prompt

    def test_chain_prompt_renders_each_answer_line_once(self, chain_kb):
        bundle = self._bundle(chain_kb)
        captured = {}

        def grab(messages):
            captured["prompt"] = messages[-1].content
            return "done"

        synthesize("Where was the director born?", bundle, MockChatModel(responder=grab), CallLedger())
        prompt = captured["prompt"]
        assert prompt.count("Intermediate answer 1: zephyrone") == 1
        assert prompt.count("Intermediate answer 2: quasartwo") == 1

    def test_contributes_exactly_one_chat_call(self, chain_kb):
        ledger = CallLedger()
        synthesize("q?", self._bundle(chain_kb), MockChatModel(default_response="x"), ledger)
        assert ledger.chat_calls == 1
        assert ledger.per_stage["synthesize"].chat_calls == 1


class TestAnswerQuery:
    CHAIN_Q = "Who directed widgetfilm? >> Where was {answer:1} born?"

    def test_full_mode_two_chat_calls_three_hops(self, chain_kb, chain_index, mock_services):
        question = (
            "Who directed widgetfilm? >> Where was {answer:1} born? >> "
            "Which city hosts the stonearena?"
        )
        result = answer_query(question, Mode.FULL, mock_services, chain_kb, chain_index, k=2)
        assert result.ledger.chat_calls == 2
        assert len(result.evidence.hops) == 3

    def test_vanilla_single_chat_call(self, chain_kb, chain_index, mock_services):
        result = answer_query(
            "Who directed widgetfilm?", Mode.VANILLA_RAG, mock_services, chain_kb, chain_index
        )
        assert result.ledger.chat_calls == 1
        assert result.ledger.extractor_calls == 0
        assert result.ledger.rewriter_calls == 0

    def test_mode_call_profile(self, chain_kb, chain_index, mock_services):
        result_no_rw = answer_query(
            self.CHAIN_Q, Mode.NO_REWRITER, mock_services, chain_kb, chain_index, k=2
        )
        assert result_no_rw.ledger.rewriter_calls == 0
        assert result_no_rw.ledger.chat_calls == 2
        result_ro = answer_query(
            self.CHAIN_Q, Mode.RETRIEVAL_ONLY, mock_services, chain_kb, chain_index, k=2
        )
        assert result_ro.ledger.rewriter_calls == 0
        assert result_ro.ledger.extractor_calls == 0
        assert result_ro.ledger.chat_calls == 2

    def test_dependencies_precede_dependents(self, chain_kb, chain_index, mock_services):
        result = answer_query(self.CHAIN_Q, Mode.FULL, mock_services, chain_kb, chain_index, k=2)
        seen: set[int] = set()
        for hop in result.evidence.hops:
            sub = next(s for s in result.evidence.plan.sub_questions if s.id == hop.sub_id)
            assert set(sub.depends_on) <= seen
            seen.add(hop.sub_id)

    def test_placeholders_absent_after_grounding(self, chain_kb, chain_index, mock_services):
        for mode in (Mode.FULL, Mode.NO_REWRITER):
            result = answer_query(self.CHAIN_Q, mode, mock_services, chain_kb, chain_index, k=2)
            for hop in result.evidence.hops:
                assert "{answer:" not in hop.resolved_text

    def test_pure_function_of_inputs(self, chain_kb, chain_index):
        def fresh_services():
            return Services(
                PipelineMockChat(), MockEmbedder(dim=32, seed=0), MockSpanExtractor(), MockRewriter()
            )

        a = answer_query(self.CHAIN_Q, Mode.FULL, fresh_services(), chain_kb, chain_index, k=2)
        b = answer_query(self.CHAIN_Q, Mode.FULL, fresh_services(), chain_kb, chain_index, k=2)
        assert a.answer == b.answer
        assert a.ledger.to_dict() == b.ledger.to_dict()
        assert a.evidence == b.evidence

    def test_empty_question_rejected(self, chain_kb, chain_index, mock_services):
        with pytest.raises(ValueError):
            answer_query("  ", Mode.FULL, mock_services, chain_kb, chain_index)

    def test_multihop_answer_correct_end_to_end(self, chain_kb, chain_index, mock_services):
        result = answer_query(self.CHAIN_Q, Mode.FULL, mock_services, chain_kb, chain_index, k=2)
        assert result.answer == "rivertown"
