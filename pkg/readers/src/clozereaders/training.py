"""Training and prediction emission.

``train_reader`` consumes a dialogue file, a query file, and a split
file, trains the configured architecture on the train partition, logs a
metric row per epoch (row 0 is the untouched initial model), and keeps
the weights from the epoch with the best dev metric. ``emit_predictions``
loads a saved artifact and writes a prediction file the benchmark
toolkit's evaluator accepts as is: one record per query id, sorted,
canonical JSON, LF endings.

Determinism: training is seeded; byte-level reproducibility is promised
only for frozen-model inference, where threads are pinned to one and
batch composition is fixed by sorting query ids.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
import torch.nn.functional as F

from .config import ReaderConfig
from .data import (
    HEAD_VARS,
    Batch,
    Example,
    Vocab,
    collate,
    encode_examples,
    entity_token,
    n_classes_for,
    read_dialogues,
    read_queries,
    read_split,
    vocab_tokens,
)
from .errors import (
    ConfigMismatch,
    IoFailure,
    MalformedFile,
    OutOfMemory,
    TaskMismatch,
)
from .models import build_model, masked_logits
from .runs import METRICS_FILE, RunManifest, write_manifest, write_metrics_log

MODEL_FILE = "model.pt"
MODEL_FORMAT = "clozereaders-model/1"
PREDICTIONS_FILE = "predictions.jsonl"


def _oom(exc: RuntimeError, batch_size: int) -> OutOfMemory:
    return OutOfMemory(
        f"allocation failed at batch_size={batch_size}; "
        f"retry with a smaller --batch-size ({exc})"
    )


def _batch_loss(model, batch: Batch) -> torch.Tensor:
    logits = masked_logits(model(batch), batch.cand_mask)
    losses = []
    for h in range(logits.shape[1]):
        targets = batch.labels[:, h]
        if (targets != -100).any():
            losses.append(F.cross_entropy(logits[:, h], targets,
                                          ignore_index=-100))
    if not losses:
        return torch.zeros((), device=logits.device)
    return torch.stack(losses).mean()


def _predict_batch(model, batch: Batch) -> list[dict]:
    """Per example: variable -> candidate token, one entry per head."""
    logits = masked_logits(model(batch), batch.cand_mask)
    picks = logits.argmax(dim=2)  # [B, n_heads]
    out = []
    for i, ex in enumerate(batch.examples):
        head_vars = HEAD_VARS[ex.task]
        assignment = {}
        for h, var in enumerate(head_vars):
            label = int(picks[i, h])
            assignment[var] = ex.cand_tokens.get(label, entity_token(label))
        out.append(assignment)
    return out


def _dev_metric(model, examples: list[Example], n_classes: int,
                task: str, batch_size: int) -> float:
    """Accuracy for single-variable tasks, micro F1 for tv (both heads
    always emitted). Internal model-selection metric only; official
    numbers come from the benchmark evaluator."""
    if not examples:
        return 0.0
    c_r = c_a = c_g = exact = 0
    with torch.no_grad():
        for start in range(0, len(examples), batch_size):
            batch = collate(examples[start : start + batch_size],
                            n_classes, task)
            for ex, assignment in zip(batch.examples, _predict_batch(model, batch)):
                gold = {v: ex.gold_labels[v] for v in ex.gold_labels}
                pred = {v: e for v, e in assignment.items()}
                gold_tok = {v: entity_token(l) for v, l in gold.items()}
                c_a += len(pred)
                c_g += len(gold)
                c_r += sum(1 for v, e in pred.items() if gold_tok.get(v) == e)
                exact += int(pred == gold_tok)
    if task != "tv":
        return exact / len(examples)
    p = c_r / c_a if c_a else 0.0
    r = c_r / c_g if c_g else 0.0
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _epoch_loss(model, examples: list[Example], n_classes: int, task: str,
                batch_size: int) -> float:
    total, n = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(examples), batch_size):
            chunk = examples[start : start + batch_size]
            batch = collate(chunk, n_classes, task)
            total += float(_batch_loss(model, batch)) * len(chunk)
            n += len(chunk)
    return total / n if n else 0.0


@dataclass
class TrainResult:
    model_path: Path
    metrics_path: Path
    task: str
    best_dev_metric: float
    n_train: int
    n_dev: int


def train_reader(
    config: ReaderConfig,
    dialogues_path: Path | str,
    queries_path: Path | str,
    split_path: Path | str,
    out_dir: Path | str,
    stamp: str | None = None,
) -> TrainResult:
    out_dir = Path(out_dir)
    scenes = read_dialogues(dialogues_path)
    queries = read_queries(queries_path)
    assignment = read_split(split_path)
    task = queries[0].task

    train_q = [q for q in queries if assignment.get(q.query_id) == "train"]
    dev_q = [q for q in queries if assignment.get(q.query_id) == "dev"]
    if not train_q:
        raise ConfigMismatch(
            "split file assigns no query in this file to the train partition"
        )

    # vocabulary comes from the train partition only
    train_keys = {q.dialogue_key for q in train_q}
    train_scenes = [s for s in scenes if s.key in train_keys]
    vocab = Vocab.build(vocab_tokens(train_scenes, train_q))

    all_examples = encode_examples(scenes, queries, vocab, config.max_len)
    n_classes = n_classes_for(scenes, all_examples)
    by_id = {ex.query_id: ex for ex in all_examples}
    train_ex = [by_id[q.query_id] for q in train_q]
    dev_ex = [by_id[q.query_id] for q in dev_q]

    torch.manual_seed(config.seed)
    n_heads = len(HEAD_VARS[task])
    model = build_model(config, len(vocab), n_classes, n_heads)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    shuffler = torch.Generator().manual_seed(config.seed)

    def snapshot():
        return {k: v.detach().clone() for k, v in model.state_dict().items()}

    model.eval()
    rows = [{
        "epoch": 0,
        "train_loss": _epoch_loss(model, train_ex, n_classes, task,
                                  config.batch_size),
        "dev_metric": _dev_metric(model, dev_ex, n_classes, task,
                                  config.batch_size),
    }]
    best_state, best_metric = snapshot(), rows[0]["dev_metric"]

    try:
        for epoch in range(1, config.epochs + 1):
            model.train()
            order = torch.randperm(len(train_ex), generator=shuffler).tolist()
            for start in range(0, len(order), config.batch_size):
                chunk = [train_ex[i] for i in order[start : start + config.batch_size]]
                batch = collate(chunk, n_classes, task)
                loss = _batch_loss(model, batch)
                if loss.requires_grad:
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
            model.eval()
            row = {
                "epoch": epoch,
                "train_loss": _epoch_loss(model, train_ex, n_classes, task,
                                          config.batch_size),
                "dev_metric": _dev_metric(model, dev_ex, n_classes, task,
                                          config.batch_size),
            }
            rows.append(row)
            if row["dev_metric"] > best_metric:
                best_metric = row["dev_metric"]
                best_state = snapshot()
    except RuntimeError as exc:
        if "out of memory" in str(exc).lower():
            raise _oom(exc, config.batch_size) from exc
        raise

    artifact = {
        "format": MODEL_FORMAT,
        "architecture": config.architecture,
        "task": task,
        "config": config.to_dict(),
        "vocab": vocab.tokens(),
        "n_classes": n_classes,
        "state_dict": best_state,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    model_path = out_dir / MODEL_FILE
    try:
        torch.save(artifact, model_path)
    except OSError as exc:
        raise IoFailure(f"cannot write {model_path}: {exc}") from exc
    metrics_path = write_metrics_log(rows, out_dir / METRICS_FILE)

    manifest = RunManifest(
        subcommand="train",
        config={**{k: str(v) for k, v in config.to_dict().items()}, "task": task},
        seed=config.seed,
    )
    for p in (dialogues_path, queries_path, split_path):
        manifest.add_input(p)
    manifest.add_output(model_path, out_dir)
    manifest.add_output(metrics_path, out_dir)
    write_manifest(manifest, out_dir, stamp)

    return TrainResult(model_path, metrics_path, task, best_metric,
                       len(train_ex), len(dev_ex))


def load_artifact(path: Path | str) -> dict:
    try:
        artifact = torch.load(path, map_location="cpu", weights_only=True)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except Exception as exc:  # torch wraps format problems many ways
        raise MalformedFile(f"{path}: not a reader artifact: {exc}") from exc
    if not isinstance(artifact, dict) or artifact.get("format") != MODEL_FORMAT:
        raise MalformedFile(f"{path}: not a {MODEL_FORMAT} artifact")
    return artifact


def emit_predictions(
    model_path: Path | str,
    dialogues_path: Path | str,
    queries_path: Path | str,
    out_dir: Path | str,
    single_variable_tv: bool = False,
    stamp: str | None = None,
) -> Path:
    out_dir = Path(out_dir)
    artifact = load_artifact(model_path)
    config = ReaderConfig.from_dict(artifact["config"])
    task = artifact["task"]

    scenes = read_dialogues(dialogues_path)
    queries = read_queries(queries_path)
    if queries[0].task != task:
        raise TaskMismatch(
            f"model was trained for {task!r}, query file holds {queries[0].task!r}"
        )

    vocab = Vocab(artifact["vocab"])
    n_classes = int(artifact["n_classes"])
    examples = encode_examples(scenes, queries, vocab, config.max_len)
    for ex in examples:
        if any(label >= n_classes for label in ex.candidates):
            raise ConfigMismatch(
                f"query {ex.query_id} has candidates outside the model's "
                f"label space (K={n_classes})"
            )
    examples.sort(key=lambda ex: ex.query_id)

    # frozen inference is the determinism contract: one thread, fixed
    # batch composition
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        model = build_model(config, len(vocab), n_classes,
                            len(HEAD_VARS[task]))
        model.load_state_dict(artifact["state_dict"])
        model.eval()
        records = []
        with torch.no_grad():
            for start in range(0, len(examples), config.batch_size):
                batch = collate(examples[start : start + config.batch_size],
                                n_classes, task)
                for ex, assignment in zip(batch.examples,
                                          _predict_batch(model, batch)):
                    if (task == "tv" and single_variable_tv
                            and len(ex.variables) == 1):
                        var = ex.variables[0]
                        assignment = {var: assignment[var]}
                    records.append(
                        {"query_id": ex.query_id, "assignments": assignment}
                    )
    except RuntimeError as exc:
        if "out of memory" in str(exc).lower():
            raise _oom(exc, config.batch_size) from exc
        raise
    finally:
        torch.set_num_threads(n_threads)

    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / PREDICTIONS_FILE
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for rec in records:
                ordered = {
                    "query_id": rec["query_id"],
                    "assignments": {
                        k: rec["assignments"][k]
                        for k in sorted(rec["assignments"])
                    },
                }
                f.write(json.dumps(ordered, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc

    manifest = RunManifest(
        subcommand="predict",
        config={
            **{k: str(v) for k, v in config.to_dict().items()},
            "task": task,
            "single_variable_tv": str(single_variable_tv),
        },
        seed=config.seed,
    )
    for p in (model_path, dialogues_path, queries_path):
        manifest.add_input(p)
    manifest.add_output(path, out_dir)
    write_manifest(manifest, out_dir, stamp)
    return path
