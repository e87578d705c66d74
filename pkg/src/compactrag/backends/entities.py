"""Rule-based entity annotator used as the default tagger.

Capitalized token runs are tagged NAME and standalone four-digit numbers
DATE. Deliberately crude: the interface exists so a stronger tagger (e.g.
the model sidecar's /entities endpoint) can be swapped in.
"""

from __future__ import annotations

import re

from compactrag.backends.base import EntityMention

_CAP_RUN = re.compile(r"(?<![\w'])[A-Z][A-Za-z']*(?:[ ][A-Z][A-Za-z']*)*")
_YEAR = re.compile(r"(?<!\d)\d{4}(?!\d)")


class RuleBasedAnnotator:
    def annotate_entities(self, passage_text: str) -> list[EntityMention]:
        mentions = [
            EntityMention(m.group(0), "NAME", m.start(), m.end())
            for m in _CAP_RUN.finditer(passage_text)
        ]
        mentions += [
            EntityMention(m.group(0), "DATE", m.start(), m.end())
            for m in _YEAR.finditer(passage_text)
        ]
        mentions.sort(key=lambda m: (m.char_start, m.char_end))
        return mentions
