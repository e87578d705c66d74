"""Scoring, benchmark running, and token accounting.

EM/F1 use the standard open-domain QA normalization (lowercase, strip
punctuation, drop articles, collapse whitespace). The LLM judge is an
evaluation instrument: its calls are metered on a separate ledger and
excluded from per-query inference token accounting.
"""

from __future__ import annotations

import json
import logging
import os
import re
import string
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from compactrag import prompts
from compactrag.backends.base import ChatBackend, ChatMessage
from compactrag.index import DEFAULT_TOP_K, VectorIndex
from compactrag.kbgen import KnowledgeBase
from compactrag.ledger import CallLedger
from compactrag.pipeline import Mode, Services, answer_query, result_to_dict

logger = logging.getLogger(__name__)

FAILURE_EXIT_THRESHOLD = 0.2

_ARTICLES = re.compile(r"\b(a|an|the)\b")
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)


@dataclass(frozen=True)
class DatasetItem:
    id: str
    question: str
    gold_answer: str


@dataclass(frozen=True)
class MetricReport:
    n: int
    em: float
    f1: float
    acc: float | None
    unscored: int
    avg_tokens_per_query: float
    offline_cost: int
    mode: str
    failures: int


@dataclass(frozen=True)
class TokenCurvePoint:
    query_index: int
    per_query_tokens: int
    cumulative_tokens: int


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation, drop articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLES.sub(" ", text)
    return " ".join(text.split())


def exact_match(pred: str, gold: str) -> int:
    return int(normalize_answer(pred) == normalize_answer(gold))


def f1_score(pred: str, gold: str) -> float:
    """Bag-of-tokens F1 over normalized tokens."""
    pred_tokens = normalize_answer(pred).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def llm_judge(
    question: str,
    prediction: str,
    gold: str,
    chat: ChatBackend,
    ledger: CallLedger | None = None,
) -> bool | None:
    """Semantic-correctness verdict; None means the reply was unusable."""
    prompt = prompts.fill(
        prompts.JUDGE_PROMPT_TEMPLATE, question=question, prediction=prediction, answer=gold
    )
    response = chat.chat([ChatMessage("user", prompt)], temperature=0.0)
    if ledger is not None:
        ledger.record_chat("judge", response.prompt_tokens, response.completion_tokens)
    verdict = response.text.strip().lower()
    if verdict.startswith("yes"):
        return True
    if verdict.startswith("no"):
        return False
    logger.warning("unscorable judge reply %r for question %r", response.text, question)
    return None


def load_dataset(path: str) -> list[DatasetItem]:
    items: list[DatasetItem] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            for key in ("id", "question", "answer"):
                if not record.get(key):
                    raise ValueError(f"{path}: missing or empty {key!r} at line {lineno}")
            items.append(DatasetItem(str(record["id"]), record["question"], record["answer"]))
    return items


def run_benchmark(
    dataset_path: str,
    mode: Mode,
    services: Services,
    kb: KnowledgeBase,
    index: VectorIndex,
    k: int = DEFAULT_TOP_K,
    judge: bool = False,
    judge_chat: ChatBackend | None = None,
    out_dir: str | None = None,
    concurrency: int = 1,
) -> tuple[MetricReport, list[dict]]:
    """Answer every dataset item, aggregate metrics, persist artifacts.

    Item-level failures are recorded and excluded from the aggregates;
    the run keeps going. Judge calls are metered separately and never
    count toward per-query tokens.
    """
    mode = Mode(mode)
    items = load_dataset(dataset_path)
    judge_backend = judge_chat or services.chat
    judge_ledger = CallLedger()

    def run_item(item: DatasetItem) -> dict:
        record: dict = {"id": item.id, "question": item.question, "gold_answer": item.gold_answer}
        try:
            result = answer_query(item.question, mode, services, kb, index, k)
        except Exception as exc:  # noqa: BLE001 - item failures must not kill the run
            logger.warning("item %s failed: %s", item.id, exc)
            record.update(prediction=None, em=None, f1=None, judge=None, tokens=None, error=str(exc))
            return record
        record["prediction"] = result.answer
        record["em"] = exact_match(result.answer, item.gold_answer)
        record["f1"] = f1_score(result.answer, item.gold_answer)
        record["judge"] = (
            llm_judge(item.question, result.answer, item.gold_answer, judge_backend, judge_ledger)
            if judge
            else None
        )
        record["tokens"] = result.ledger.to_dict()
        record["error"] = None
        return record

    if concurrency == 1:
        records = [run_item(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            records = list(pool.map(run_item, items))

    scored = [r for r in records if r["error"] is None]
    failures = len(records) - len(scored)
    judged = [r for r in scored if r["judge"] is not None]
    unscored = sum(1 for r in scored if judge and r["judge"] is None)
    report = MetricReport(
        n=len(scored),
        em=sum(r["em"] for r in scored) / len(scored) if scored else 0.0,
        f1=sum(r["f1"] for r in scored) / len(scored) if scored else 0.0,
        acc=(sum(1 for r in judged if r["judge"]) / len(judged)) if judge and judged else None,
        unscored=unscored,
        avg_tokens_per_query=(
            sum(r["tokens"]["total_tokens"] for r in scored) / len(scored) if scored else 0.0
        ),
        offline_cost=kb.offline_token_cost,
        mode=mode.value,
        failures=failures,
    )
    if out_dir is not None:
        write_run_artifacts(report, records, out_dir)
    return report, records


def report_to_dict(report: MetricReport) -> dict:
    return {
        "n": report.n,
        "em": report.em,
        "f1": report.f1,
        "acc": report.acc,
        "unscored": report.unscored,
        "avg_tokens_per_query": report.avg_tokens_per_query,
        "offline_cost": report.offline_cost,
        "mode": report.mode,
        "failures": report.failures,
    }


def write_run_artifacts(report: MetricReport, records: Sequence[dict], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.jsonl"), "w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(report_to_dict(report), ensure_ascii=False, indent=2) + "\n")


def token_curves(per_query_tokens: Sequence[int], offline_cost: int) -> list[TokenCurvePoint]:
    """Cumulative token series seeded with the one-time offline cost."""
    points = [TokenCurvePoint(0, 0, offline_cost)]
    cumulative = offline_cost
    for i, tokens in enumerate(per_query_tokens, start=1):
        cumulative += tokens
        points.append(TokenCurvePoint(i, tokens, cumulative))
    return points


def write_curves_csv(points: Sequence[TokenCurvePoint], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("query_index,per_query_tokens,cumulative_tokens\n")
        for point in points:
            fh.write(f"{point.query_index},{point.per_query_tokens},{point.cumulative_tokens}\n")


def first_crossover(
    a: Sequence[TokenCurvePoint], b: Sequence[TokenCurvePoint]
) -> int | None:
    """First query index where curve `a` drops strictly below curve `b`."""
    for pa, pb in zip(a, b):
        if pa.cumulative_tokens < pb.cumulative_tokens:
            return pa.query_index
    return None


def per_query_tokens_from_records(records: Sequence[dict]) -> list[int]:
    """Pull per-item inference token totals out of benchmark records."""
    out = []
    for record in records:
        tokens = record.get("tokens")
        out.append(int(tokens["total_tokens"]) if tokens else 0)
    return out
