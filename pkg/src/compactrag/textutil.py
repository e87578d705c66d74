"""Small lexical helpers shared by the pipeline and the mock backends."""

from __future__ import annotations

import re

_EDGE_PUNCT = re.compile(r"^\W+|\W+$", re.UNICODE)

PRONOUNS = frozenset(
    ["he", "she", "it", "they", "him", "her", "them", "his", "its", "their"]
)


def lex_tokens(text: str) -> list[str]:
    """Lowercased whitespace tokens with edge punctuation stripped."""
    tokens = []
    for raw in text.split():
        tok = _EDGE_PUNCT.sub("", raw).lower()
        if tok:
            tokens.append(tok)
    return tokens


def contains_pronoun(text: str) -> bool:
    return any(tok in PRONOUNS for tok in lex_tokens(text))
