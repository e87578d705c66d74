"""Exception hierarchy shared across the engine."""


class CompactRAGError(Exception):
    """Base class for all engine errors."""


class TransportError(CompactRAGError):
    """Network-level failure talking to a backend; retryable by policy."""


class ProtocolError(CompactRAGError):
    """Backend answered, but the body could not be interpreted."""


class ConfigError(CompactRAGError):
    """Mismatched or invalid configuration (dimensions, URLs, modes)."""


class CorpusFormatError(CompactRAGError):
    """Malformed corpus file; message names the offending line."""


class ReaderOutputError(CompactRAGError):
    """Reader model output could not be parsed into facts and QA drafts."""


class KBBuildError(CompactRAGError):
    """KB construction aborted (too many passages skipped)."""


class FileFormatError(CompactRAGError):
    """Persisted KB/index file has a wrong version or is structurally broken."""


class DecompositionError(CompactRAGError):
    """Decomposition plan is ill-formed (cycles, bad references)."""


class QueryError(CompactRAGError):
    """A query failed inside the online pipeline."""
