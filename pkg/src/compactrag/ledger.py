"""Per-query accounting of backend calls and token usage.

A ledger is created per query (or per offline build) and threaded through
every backend invocation. Totals are always derivable from the per-stage
breakdown, which is what the invariant checks and the serialized reports
rely on.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass


@dataclass
class StageCounters:
    chat_calls: int = 0
    extractor_calls: int = 0
    rewriter_calls: int = 0
    embed_calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0

    def to_dict(self) -> dict:
        return {
            "chat_calls": self.chat_calls,
            "extractor_calls": self.extractor_calls,
            "rewriter_calls": self.rewriter_calls,
            "embed_calls": self.embed_calls,
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
        }


class CallLedger:
    """Linearizable call/token counters with a per-stage breakdown."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.per_stage: dict[str, StageCounters] = {}

    def _stage(self, stage: str) -> StageCounters:
        return self.per_stage.setdefault(stage, StageCounters())

    def record_chat(self, stage: str, prompt_tokens: int, completion_tokens: int) -> None:
        with self._lock:
            counters = self._stage(stage)
            counters.chat_calls += 1
            counters.prompt_tokens += prompt_tokens
            counters.completion_tokens += completion_tokens

    def record_extract(self, stage: str = "extract") -> None:
        with self._lock:
            self._stage(stage).extractor_calls += 1

    def record_rewrite(self, stage: str = "rewrite") -> None:
        with self._lock:
            self._stage(stage).rewriter_calls += 1

    def record_embed(self, stage: str = "retrieve") -> None:
        with self._lock:
            self._stage(stage).embed_calls += 1

    def _total(self, attr: str) -> int:
        with self._lock:
            return sum(getattr(c, attr) for c in self.per_stage.values())

    @property
    def chat_calls(self) -> int:
        return self._total("chat_calls")

    @property
    def extractor_calls(self) -> int:
        return self._total("extractor_calls")

    @property
    def rewriter_calls(self) -> int:
        return self._total("rewriter_calls")

    @property
    def embed_calls(self) -> int:
        return self._total("embed_calls")

    @property
    def prompt_tokens(self) -> int:
        return self._total("prompt_tokens")

    @property
    def completion_tokens(self) -> int:
        return self._total("completion_tokens")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def to_dict(self) -> dict:
        with self._lock:
            stages = {name: c.to_dict() for name, c in sorted(self.per_stage.items())}
        totals = {
            key: sum(stage[key] for stage in stages.values())
            for key in (
                "chat_calls",
                "extractor_calls",
                "rewriter_calls",
                "embed_calls",
                "prompt_tokens",
                "completion_tokens",
            )
        }
        totals["total_tokens"] = totals["prompt_tokens"] + totals["completion_tokens"]
        totals["per_stage"] = stages
        return totals
