"""Command-line surface: build-kb, index, ask, eval, report.

Flags override config-file keys; `--backend mock|http` selects backend
implementations. Exit status: 0 success, 1 run-level failure, 2 usage
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, replace
from urllib.parse import urlparse

from compactrag import eval as evalmod
from compactrag import index as indexmod
from compactrag import kbgen
from compactrag.backends.entities import RuleBasedAnnotator
from compactrag.backends.http import OpenAIChatClient, OpenAIEmbeddingsClient, SidecarClient
from compactrag.backends.mock import MockEmbedder, MockRewriter, MockSpanExtractor, PipelineMockChat
from compactrag.errors import CompactRAGError, ConfigError
from compactrag.pipeline import Mode, Services, answer_query, result_to_dict

logger = logging.getLogger(__name__)


@dataclass
class Config:
    backend: str = "mock"
    chat_base_url: str = ""
    chat_model: str = ""
    embed_base_url: str = ""
    embed_model: str = ""
    sidecar_base_url: str = ""
    k: int = 5
    mode: str = "full"
    concurrency: int = 1
    seed: int = 0
    mock_dim: int = 32

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.concurrency < 1:
            raise ConfigError("concurrency must be >= 1")
        if self.backend not in ("mock", "http"):
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.backend == "mock" and not isinstance(self.seed, int):
            raise ConfigError("mock backend requires an integer seed")
        if self.backend == "http":
            for name, url in (
                ("chat", self.chat_base_url),
                ("embeddings", self.embed_base_url),
            ):
                parsed = urlparse(url)
                if parsed.scheme not in ("http", "https") or not parsed.netloc:
                    raise ConfigError(f"{name} base URL is not a valid http(s) URL: {url!r}")


def load_config(path: str | None) -> Config:
    config = Config()
    if path is None:
        return config
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    chat = raw.get("chat", {})
    embeddings = raw.get("embeddings", {})
    sidecar = raw.get("sidecar", {})
    return replace(
        config,
        backend=raw.get("backend", config.backend),
        chat_base_url=chat.get("base_url", config.chat_base_url),
        chat_model=chat.get("model", config.chat_model),
        embed_base_url=embeddings.get("base_url", config.embed_base_url),
        embed_model=embeddings.get("model", config.embed_model),
        sidecar_base_url=sidecar.get("base_url", config.sidecar_base_url),
        k=raw.get("k", config.k),
        mode=raw.get("mode", config.mode),
        concurrency=raw.get("concurrency", config.concurrency),
        seed=raw.get("seed", config.seed),
        mock_dim=raw.get("mock_dim", config.mock_dim),
    )


def build_services(config: Config) -> tuple[Services, object]:
    """Instantiate backends; returns (services, annotator)."""
    config.validate()
    if config.backend == "mock":
        services = Services(
            chat=PipelineMockChat(),
            embedder=MockEmbedder(dim=config.mock_dim, seed=config.seed),
            extractor=MockSpanExtractor(),
            rewriter=MockRewriter(),
        )
        return services, RuleBasedAnnotator()
    chat = OpenAIChatClient(config.chat_base_url, config.chat_model)
    embedder = OpenAIEmbeddingsClient(config.embed_base_url, config.embed_model)
    if config.sidecar_base_url:
        sidecar = SidecarClient(config.sidecar_base_url)
        return Services(chat, embedder, sidecar, sidecar), sidecar
    raise ConfigError("http backend requires a sidecar base URL for extractor/rewriter")


def _apply_overrides(config: Config, args: argparse.Namespace) -> Config:
    for attr in ("backend", "k", "mode", "concurrency", "seed"):
        value = getattr(args, attr, None)
        if value is not None:
            config = replace(config, **{attr: value})
    return config


def _cmd_build_kb(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    services, annotator = build_services(config)
    corpus = kbgen.load_corpus(args.corpus)
    corpus_id = os.path.splitext(os.path.basename(args.corpus))[0]
    kb = kbgen.build_kb(
        corpus, services.chat, annotator, corpus_id=corpus_id, concurrency=config.concurrency
    )
    kbgen.save_kb(kb, args.out)
    valid = sum(1 for p in kb.pairs if p.valid)
    print(
        json.dumps(
            {
                "kb": args.out,
                "passages": len(corpus),
                "pairs": len(kb.pairs),
                "valid_pairs": valid,
                "facts": len(kb.facts),
                "offline_token_cost": kb.offline_token_cost,
            }
        )
    )
    return 0


def _cmd_index(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    services, _ = build_services(config)
    kb = kbgen.load_kb(args.kb)
    idx = indexmod.build_index(kb, services.embedder)
    indexmod.save_index(idx, args.out)
    print(json.dumps({"index": args.out, "entries": len(idx), "dim": idx.dim}))
    return 0


def _load_kb_and_index(kb_path: str, index_path: str):
    kb = kbgen.load_kb(kb_path)
    idx = indexmod.load_index(index_path)
    if idx.kb_ref != kb.source_corpus_id:
        logger.warning(
            "index was built from corpus %r but KB is %r", idx.kb_ref, kb.source_corpus_id
        )
    return kb, idx


def _cmd_ask(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    services, _ = build_services(config)
    kb, idx = _load_kb_and_index(args.kb, args.index)
    result = answer_query(args.question, Mode(config.mode), services, kb, idx, k=config.k)
    print(json.dumps(result_to_dict(result, include_evidence=args.emit_evidence), ensure_ascii=False))
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_config(args.config), args)
    services, _ = build_services(config)
    kb, idx = _load_kb_and_index(args.kb, args.index)
    report, records = evalmod.run_benchmark(
        args.dataset,
        Mode(config.mode),
        services,
        kb,
        idx,
        k=config.k,
        judge=args.judge,
        out_dir=args.out,
        concurrency=config.concurrency,
    )
    print(json.dumps(evalmod.report_to_dict(report), ensure_ascii=False))
    total = len(records)
    if total and report.failures / total > evalmod.FAILURE_EXIT_THRESHOLD:
        logger.error("%d/%d items failed", report.failures, total)
        return 1
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    results_path = os.path.join(args.results, "results.jsonl")
    records = []
    with open(results_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    tokens = evalmod.per_query_tokens_from_records(records)
    points = evalmod.token_curves(tokens, args.offline_cost)
    evalmod.write_curves_csv(points, args.out)
    print(
        json.dumps(
            {
                "curves": args.out,
                "queries": len(tokens),
                "final_cumulative_tokens": points[-1].cumulative_tokens,
            }
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="compactrag",
        description="Multi-hop QA over an atomic QA knowledge base with a fixed two-LLM-call budget.",
    )
    parser.add_argument("--verbose", "-v", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--backend", choices=["mock", "http"], help="backend implementations")
        p.add_argument("--seed", type=int, help="seed for mock backends")
        p.add_argument("--k", type=int, help="retrieval depth per hop")
        p.add_argument("--concurrency", type=int, help="worker width")

    p_build = sub.add_parser("build-kb", help="read a corpus into an atomic QA knowledge base")
    add_common(p_build)
    p_build.add_argument("--corpus", required=True, help="corpus JSONL path")
    p_build.add_argument("--out", required=True, help="output KB path")
    p_build.set_defaults(func=_cmd_build_kb)

    p_index = sub.add_parser("index", help="embed a KB into a dense index")
    add_common(p_index)
    p_index.add_argument("--kb", required=True, help="KB path")
    p_index.add_argument("--out", required=True, help="output index path")
    p_index.set_defaults(func=_cmd_index)

    p_ask = sub.add_parser("ask", help="answer one question")
    add_common(p_ask)
    p_ask.add_argument("--kb", required=True)
    p_ask.add_argument("--index", required=True)
    p_ask.add_argument("--question", required=True)
    p_ask.add_argument("--mode", choices=[m.value for m in Mode], help="pipeline mode")
    p_ask.add_argument("--emit-evidence", action="store_true", help="include the evidence bundle")
    p_ask.set_defaults(func=_cmd_ask)

    p_eval = sub.add_parser("eval", help="run a benchmark dataset")
    add_common(p_eval)
    p_eval.add_argument("--dataset", required=True, help="dataset JSONL path")
    p_eval.add_argument("--kb", required=True)
    p_eval.add_argument("--index", required=True)
    p_eval.add_argument("--mode", choices=[m.value for m in Mode])
    p_eval.add_argument("--judge", action="store_true", help="score with the LLM judge")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.set_defaults(func=_cmd_eval)

    p_report = sub.add_parser("report", help="emit token curves from a finished eval run")
    p_report.add_argument("--results", required=True, help="eval output directory")
    p_report.add_argument("--offline-cost", type=int, required=True, help="one-time KB build tokens")
    p_report.add_argument("--out", required=True, help="curves CSV path")
    p_report.set_defaults(func=_cmd_report)
    return parser


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except CompactRAGError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
