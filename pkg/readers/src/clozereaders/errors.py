"""Error taxonomy. Every deliberate failure derives from ReaderError so
the CLI can map the whole family to one exit code."""


class ReaderError(Exception):
    pass


class MalformedFile(ReaderError):
    """An interchange file violates its documented shape."""


class IoFailure(ReaderError):
    pass


class ConfigMismatch(ReaderError):
    """Configuration inconsistent with the architecture or the data."""


class TaskMismatch(ReaderError):
    """Model artifact and query file disagree on the task."""


class OutOfMemory(ReaderError):
    """Device allocation failed; message carries a batch-size hint."""
