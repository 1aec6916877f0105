"""Run manifests: one per pipeline output directory.

A manifest captures everything needed to check a run reproduced: the
subcommand, every resolved config value, sha256 digests of all input and
output files, the seed, the toolkit version, and a timestamp. Two runs
with identical inputs, config, seed, and pinned timestamp produce
byte-identical manifests.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import IoFailure

MANIFEST_FILE = "manifest.json"
MANIFEST_FORMAT = "plotcloze-manifest/1"


def sha256_file(path: Path | str) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 20), b""):
                h.update(chunk)
    except OSError as exc:
        raise IoFailure(f"cannot digest {path}: {exc}") from exc
    return h.hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    config: dict = field(default_factory=dict)
    seed: int | None = None
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    timestamp: str = ""
    version: str = __version__

    def add_input(self, path: Path | str) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path: Path | str, relative_to: Path | str) -> None:
        rel = str(Path(path).relative_to(relative_to))
        self.outputs[rel] = sha256_file(path)

    def to_dict(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "subcommand": self.subcommand,
            "version": self.version,
            "timestamp": self.timestamp,
            "seed": self.seed,
            "config": {k: self.config[k] for k in sorted(self.config)},
            "inputs": {k: self.inputs[k] for k in sorted(self.inputs)},
            "outputs": {k: self.outputs[k] for k in sorted(self.outputs)},
        }


def write_manifest(manifest: RunManifest, out_dir: Path | str,
                   stamp: str | None = None) -> Path:
    manifest.timestamp = stamp or datetime.now(timezone.utc).isoformat()
    path = Path(out_dir) / MANIFEST_FILE
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(manifest.to_dict(), f, indent=2)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path
