"""Scoring of prediction files and error-worksheet export.

Single-answer tasks (sv, mvs) use accuracy C_r / C_t, where C_t counts
every gold query (a query with no prediction is wrong) and C_r counts
predictions equal to gold.

The two-variable task is scored micro-averaged over the whole set:
C_g = total gold assignments, C_a = total predicted assignments, C_r =
assignments where the predicted entity for a variable equals the gold
entity for that same variable. precision = C_r/C_a, recall = C_r/C_g,
F1 = 2*p*r/(p+r). Variable identity matters: predicting gold's x2 entity
as x1 scores nothing unless the two gold entities are equal. Conventions:
precision is 0 when C_a = 0, recall is 0 when C_g = 0, F1 is 0 when
p + r = 0.

Worksheets bundle a seeded uniform sample of wrong predictions with full
dialogue and query context for human error categorization. The category
vocabulary is fixed in ERROR_CATEGORIES; rows leave category empty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus
from .errors import (
    DuplicatePrediction,
    IllegalVariable,
    IoFailure,
    MalformedFile,
    UnknownQueryId,
)
from .rng import SplitMix64
from .taskgen import Query

LEGAL_VARIABLES = {"sv": {"x"}, "mvs": {"x"}, "tv": {"x1", "x2"}}

ERROR_CATEGORIES = (
    "hidden_meaning",
    "utterance_reasoning_summary",
    "coreference_resolution",
    "object_linking",
    "annotation",
    "handle_single_variable",
    "miscellaneous",
)


@dataclass(frozen=True)
class PredictionRecord:
    query_id: str
    assignments: dict[str, str]  # variable name -> "@entNN"


@dataclass
class EvalReport:
    task: str
    n_queries: int
    metrics: dict[str, float]
    counters: dict[str, int]
    verdicts: dict[str, bool] = field(default_factory=dict, repr=False)
    split: str | None = None


def _index_predictions(
    gold: list[Query], preds: list[PredictionRecord], task: str
) -> dict[str, PredictionRecord]:
    gold_ids = {q.query_id for q in gold}
    legal = LEGAL_VARIABLES[task]
    by_id: dict[str, PredictionRecord] = {}
    for p in preds:
        if p.query_id not in gold_ids:
            raise UnknownQueryId(f"prediction for unknown query {p.query_id}")
        if p.query_id in by_id:
            raise DuplicatePrediction(f"query {p.query_id} predicted twice")
        for var in p.assignments:
            if var not in legal:
                raise IllegalVariable(
                    f"query {p.query_id}: variable {var!r} not legal for task {task}"
                )
        by_id[p.query_id] = p
    return by_id


def score_sv_mvs(gold: list[Query], preds: list[PredictionRecord]) -> EvalReport:
    task = gold[0].task if gold else "sv"
    by_id = _index_predictions(gold, preds, task)

    c_t = len(gold)
    c_a = 0
    c_r = 0
    verdicts: dict[str, bool] = {}
    for q in gold:
        p = by_id.get(q.query_id)
        correct = False
        if p is not None and p.assignments:
            c_a += len(p.assignments)
            correct = p.assignments == q.gold
        if correct:
            c_r += 1
        verdicts[q.query_id] = correct

    accuracy = c_r / c_t if c_t else 0.0
    return EvalReport(
        task=task,
        n_queries=len(gold),
        metrics={"accuracy": accuracy},
        counters={"C_r": c_r, "C_t": c_t, "C_a": c_a, "C_g": len(gold)},
        verdicts=verdicts,
    )


def score_tv(gold: list[Query], preds: list[PredictionRecord]) -> EvalReport:
    by_id = _index_predictions(gold, preds, "tv")

    c_g = 0
    c_a = 0
    c_r = 0
    verdicts: dict[str, bool] = {}
    for q in gold:
        c_g += len(q.gold)
        p = by_id.get(q.query_id)
        assignments = p.assignments if p is not None else {}
        c_a += len(assignments)
        right = sum(
            1 for var, ent in assignments.items() if q.gold.get(var) == ent
        )
        c_r += right
        verdicts[q.query_id] = assignments == q.gold

    precision = c_r / c_a if c_a else 0.0
    recall = c_r / c_g if c_g else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return EvalReport(
        task="tv",
        n_queries=len(gold),
        metrics={"precision": precision, "recall": recall, "f1": f1},
        counters={"C_r": c_r, "C_t": len(gold), "C_a": c_a, "C_g": c_g},
        verdicts=verdicts,
    )


def score(gold: list[Query], preds: list[PredictionRecord], task: str) -> EvalReport:
    if task in ("sv", "mvs"):
        return score_sv_mvs(gold, preds)
    if task == "tv":
        return score_tv(gold, preds)
    raise ValueError(f"unknown task {task!r}")


# ---------------------------------------------------------------------------
# Error worksheets
# ---------------------------------------------------------------------------

def render_dialogue_lines(corpus: Corpus, key: tuple[int, int, int]) -> list[str]:
    dlg = corpus.dialogue(key)
    if dlg is None:
        return []
    lines = []
    for utt in dlg.utterances:
        who = "-" if utt.speaker is None else utt.speaker.render()
        lines.append(f"{who}\t{' '.join(utt.tokens)}")
    return lines


def export_worksheet(
    report: EvalReport,
    gold: list[Query],
    preds: list[PredictionRecord],
    corpus: Corpus,
    n: int,
    seed: int,
) -> list[dict]:
    """Seeded uniform sample of wrong predictions, context included.

    Fewer than n wrong predictions returns them all. Same seed, same
    inputs: identical worksheet.
    """
    by_qid = {q.query_id: q for q in gold}
    pred_by_qid = {p.query_id: p for p in preds}
    wrong = sorted(qid for qid, ok in report.verdicts.items() if not ok)
    picked = SplitMix64(seed).sample(wrong, min(n, len(wrong)))

    rows = []
    for qid in picked:
        q = by_qid[qid]
        p = pred_by_qid.get(qid)
        rows.append(
            {
                "query_id": qid,
                "task": q.task,
                "query": " ".join(q.tokens),
                "gold": {var: q.gold[var] for var in sorted(q.gold)},
                "predicted": (
                    {var: p.assignments[var] for var in sorted(p.assignments)}
                    if p is not None
                    else {}
                ),
                "candidates": list(q.candidates),
                "dialogue": render_dialogue_lines(corpus, q.dialogue_key),
                "category": "",
            }
        )
    return rows


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def read_predictions(path: Path | str) -> list[PredictionRecord]:
    path = Path(path)
    records = []
    seen = set()
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    qid = rec["query_id"]
                    assignments = {
                        str(k): str(v) for k, v in rec["assignments"].items()
                    }
                except (KeyError, TypeError, AttributeError,
                        json.JSONDecodeError) as exc:
                    raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
                if qid in seen:
                    raise DuplicatePrediction(
                        f"{path}:{lineno}: query {qid} predicted twice"
                    )
                seen.add(qid)
                records.append(PredictionRecord(qid, assignments))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return records


def write_predictions(preds: list[PredictionRecord], path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for p in preds:
                rec = {
                    "query_id": p.query_id,
                    "assignments": {k: p.assignments[k] for k in sorted(p.assignments)},
                }
                f.write(json.dumps(rec, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def report_to_dict(report: EvalReport) -> dict:
    return {
        "task": report.task,
        "split": report.split,
        "n_queries": report.n_queries,
        "metrics": {k: report.metrics[k] for k in sorted(report.metrics)},
        "counters": {k: report.counters[k] for k in sorted(report.counters)},
    }


def write_report(report: EvalReport, path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(report_to_dict(report), f, indent=2)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def write_worksheet(rows: list[dict], path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for row in rows:
                f.write(json.dumps(row, ensure_ascii=False,
                                   separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path
