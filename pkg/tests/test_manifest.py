"""Run manifests: digests, key order, timestamp pinning."""

import hashlib
import json
from datetime import datetime

import plotcloze
from plotcloze.manifest import (
    MANIFEST_FILE,
    MANIFEST_FORMAT,
    RunManifest,
    sha256_file,
    write_manifest,
)


def test_sha256_matches_hashlib(tmp_path):
    payload = b"forty-two bytes of deterministic junk\n" * 100
    path = tmp_path / "blob.bin"
    path.write_bytes(payload)
    assert sha256_file(path) == hashlib.sha256(payload).hexdigest()


def test_manifest_records_inputs_and_outputs(tmp_path):
    src = tmp_path / "in.txt"
    src.write_text("input\n")
    out_dir = tmp_path / "out"
    out_dir.mkdir()
    artifact = out_dir / "result.jsonl"
    artifact.write_text("{}\n")

    m = RunManifest(subcommand="generate", config={"task": "sv"}, seed=7)
    m.add_input(src)
    m.add_output(artifact, out_dir)
    d = m.to_dict()
    assert d["format"] == MANIFEST_FORMAT
    assert d["subcommand"] == "generate"
    assert d["seed"] == 7
    assert d["version"] == plotcloze.__version__
    assert str(src) in d["inputs"]
    assert d["outputs"] == {"result.jsonl": sha256_file(artifact)}


def test_manifest_key_order(tmp_path):
    m = RunManifest(subcommand="stats", config={}, seed=None)
    path = write_manifest(m, tmp_path, stamp="2026-01-01T00:00:00Z")
    assert path.name == MANIFEST_FILE
    keys = list(json.loads(path.read_text()))
    assert keys == ["format", "subcommand", "version", "timestamp", "seed",
                    "config", "inputs", "outputs"]


def test_stamp_pins_timestamp(tmp_path):
    m = RunManifest(subcommand="split", config={}, seed=1)
    a = write_manifest(m, tmp_path / "a", stamp="2026-01-01T00:00:00Z")
    b = write_manifest(m, tmp_path / "b", stamp="2026-01-01T00:00:00Z")
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["timestamp"] == "2026-01-01T00:00:00Z"


def test_unstamped_timestamp_is_parseable_utc(tmp_path):
    m = RunManifest(subcommand="split", config={}, seed=1)
    path = write_manifest(m, tmp_path)
    ts = json.loads(path.read_text())["timestamp"]
    parsed = datetime.fromisoformat(ts)
    assert parsed.utcoffset().total_seconds() == 0


def test_digest_changes_with_content(tmp_path):
    f = tmp_path / "x"
    f.write_text("one")
    d1 = sha256_file(f)
    f.write_text("two")
    assert sha256_file(f) != d1
