"""Reader configuration.

Hyperparameters the source work leaves unstated (dimensions, optimizer,
learning rate) are fixed here as committed defaults; reproducibility is
preferred over matching any particular published number. The resolved
config is serialized into every run manifest.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigMismatch

ARCHITECTURES = (
    "BiLSTM",
    "CNN_BiLSTM",
    "CNN_BiLSTM_UA_DA",
    "TransformerFineTune",
)

CNN_ARCHITECTURES = ("CNN_BiLSTM", "CNN_BiLSTM_UA_DA")


@dataclass(frozen=True)
class ReaderConfig:
    architecture: str
    embedding_dim: int = 64
    hidden_dim: int = 64
    filter_sizes: tuple[int, ...] | None = None  # CNN variants only
    epochs: int = 5
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 0
    # transformer knobs; ignored by the recurrent variants
    n_layers: int = 2
    n_heads: int = 2
    max_len: int = 256

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigMismatch(
                f"unknown architecture {self.architecture!r}; "
                f"expected one of {', '.join(ARCHITECTURES)}"
            )
        is_cnn = self.architecture in CNN_ARCHITECTURES
        if is_cnn and not self.filter_sizes:
            raise ConfigMismatch(
                f"{self.architecture} requires filter_sizes"
            )
        if not is_cnn and self.filter_sizes:
            raise ConfigMismatch(
                f"filter_sizes only apply to CNN variants, not {self.architecture}"
            )
        if self.filter_sizes is not None:
            object.__setattr__(self, "filter_sizes", tuple(self.filter_sizes))
            if any(f < 1 for f in self.filter_sizes):
                raise ConfigMismatch("filter sizes must be >= 1")
        for name in ("embedding_dim", "hidden_dim", "batch_size",
                     "n_layers", "n_heads", "max_len"):
            if getattr(self, name) < 1:
                raise ConfigMismatch(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigMismatch("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigMismatch("learning rate must be positive")
        if self.embedding_dim % self.n_heads:
            raise ConfigMismatch(
                "embedding_dim must be divisible by n_heads for the transformer"
            )

    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            d[f.name] = list(v) if isinstance(v, tuple) else v
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReaderConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigMismatch(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if kwargs.get("filter_sizes") is not None:
            kwargs["filter_sizes"] = tuple(kwargs["filter_sizes"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigMismatch(str(exc)) from exc
