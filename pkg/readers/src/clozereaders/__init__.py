"""Neural readers for dialogue cloze benchmarks.

Consumes the benchmark toolkit's interchange files (dialogues, queries,
splits) and produces prediction files its evaluator scores directly. The
two packages share no code; the JSONL formats are the whole contract.
"""

__version__ = "0.1.0"

from .config import ARCHITECTURES, ReaderConfig
from .errors import (
    ConfigMismatch,
    IoFailure,
    MalformedFile,
    OutOfMemory,
    ReaderError,
    TaskMismatch,
)
from .training import emit_predictions, train_reader

__all__ = [
    "ARCHITECTURES",
    "ReaderConfig",
    "ReaderError",
    "MalformedFile",
    "IoFailure",
    "ConfigMismatch",
    "TaskMismatch",
    "OutOfMemory",
    "train_reader",
    "emit_predictions",
    "__version__",
]
