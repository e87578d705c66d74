"""Multi-hop QA over an atomic question-answer knowledge base.

Offline, a reader model restructures a corpus into atomic QA pairs that
are densely indexed. Online, each query costs exactly two chat-model
calls (decomposition and synthesis); the hops in between run on local
retrieval, span extraction, and question rewriting.
"""

__version__ = "0.1.0"
