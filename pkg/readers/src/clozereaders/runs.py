"""Run manifests and metric logs.

Same shape as the benchmark toolkit's manifests (sha256 digests, fixed
key order, pinnable timestamp) so the two can be diffed side by side,
but implemented here independently; the packages share only formats.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import IoFailure

MANIFEST_FILE = "manifest.json"
MANIFEST_FORMAT = "clozereaders-manifest/1"
METRICS_FILE = "metrics.jsonl"


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
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    timestamp: str = ""

    def add_input(self, path: Path | str) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def add_output(self, path: Path | str, relative_to: Path | str) -> None:
        rel = str(Path(path).relative_to(relative_to))
        self.outputs[rel] = sha256_file(path)

    def to_dict(self) -> dict:
        from . import __version__

        return {
            "format": MANIFEST_FORMAT,
            "subcommand": self.subcommand,
            "version": __version__,
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


def write_metrics_log(rows: list[dict], path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for row in rows:
                f.write(json.dumps(row, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_metrics_log(path: Path | str) -> list[dict]:
    rows = []
    try:
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    rows.append(json.loads(line))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return rows
