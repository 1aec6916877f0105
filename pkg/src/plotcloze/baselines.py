"""Reference predictors: heuristics and a trainable log-linear ranker.

These provide floor and sanity numbers for the three tasks without any
neural machinery. The log-linear model scores each candidate entity of a
query's dialogue with a fixed 7-feature vector and a learned weight
vector; training minimizes softmax cross-entropy over the candidate set
with L2 regularization, by mini-batch gradient descent.

Feature vector per (query, candidate), in this fixed order:

    0 mention_count     in-text mentions of the candidate in the dialogue
    1 speaker_turns     utterances where the candidate is the speaker
    2 in_query          1.0 if the candidate appears unmasked in the query
    3 overlap           distinct plain tokens shared by the query and the
                        candidate's own utterances
    4 overlap_norm      overlap / distinct plain tokens in the query
    5 last_mention_gap  distance of the candidate's last appearance from
                        the dialogue's end, normalized to [0, 1]
    6 bias              1.0

"Plain" tokens exclude entity renderings and variable tokens. Ties are
always broken toward the lowest local id, everywhere, so predictions are
deterministic. TV predictions fill x1/x2 with the two top-ranked distinct
candidates (the same candidate twice only when the dialogue has a single
candidate); a single-variable TV query gets a single assignment only when
a positive margin is configured and the top-two score gap reaches it.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, Dialogue, is_entity_token
from .errors import (
    DimensionMismatch,
    DivergenceDetected,
    EmptyCandidates,
    IoFailure,
    MalformedFile,
    NoTrainableQueries,
)
from .evalkit import PredictionRecord
from .rng import SplitMix64
from .taskgen import Query

log = logging.getLogger(__name__)

FEATURE_NAMES = (
    "mention_count",
    "speaker_turns",
    "in_query",
    "overlap",
    "overlap_norm",
    "last_mention_gap",
    "bias",
)
N_FEATURES = len(FEATURE_NAMES)

HEURISTICS = ("random", "freq", "exclusion", "first")

MODEL_FORMAT = "plotcloze-loglinear/1"


@dataclass(frozen=True)
class Hyperparameters:
    learning_rate: float = 0.1
    epochs: int = 30
    batch_size: int = 32
    l2: float = 1e-4
    seed: int = 0
    tv_margin: float = 0.0


@dataclass(frozen=True)
class LogLinearModel:
    weights: np.ndarray
    task: str
    hyperparameters: Hyperparameters

    def __post_init__(self):
        if self.weights.shape != (N_FEATURES,):
            raise DimensionMismatch(
                f"weight vector has shape {self.weights.shape}, "
                f"expected ({N_FEATURES},)"
            )


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

def _plain_tokens(tokens) -> set[str]:
    return {
        t for t in tokens
        if not is_entity_token(t) and t not in ("x", "x1", "x2")
    }


def extract_features(dialogue: Dialogue, query: Query) -> np.ndarray:
    """Feature matrix, one row per candidate in query.candidates order."""
    n_utt = len(dialogue.utterances)
    query_plain = _plain_tokens(query.tokens)
    visible = {t for t in query.tokens if is_entity_token(t)}

    mention_count: dict[str, int] = {}
    speaker_turns: dict[str, int] = {}
    own_tokens: dict[str, set[str]] = {}
    last_seen: dict[str, int] = {}
    for i, utt in enumerate(dialogue.utterances):
        if utt.speaker is not None:
            spk = utt.speaker.render()
            speaker_turns[spk] = speaker_turns.get(spk, 0) + 1
            own_tokens.setdefault(spk, set()).update(_plain_tokens(utt.tokens))
            last_seen[spk] = i
        for _, _, ent in utt.mentions:
            name = ent.render()
            mention_count[name] = mention_count.get(name, 0) + 1
            last_seen[name] = i

    rows = np.zeros((len(query.candidates), N_FEATURES))
    for r, cand in enumerate(query.candidates):
        overlap = len(query_plain & own_tokens.get(cand, set()))
        seen = last_seen.get(cand)
        gap = 1.0 if seen is None else (n_utt - 1 - seen) / max(1, n_utt - 1)
        rows[r] = (
            mention_count.get(cand, 0),
            speaker_turns.get(cand, 0),
            1.0 if cand in visible else 0.0,
            overlap,
            overlap / max(1, len(query_plain)),
            gap,
            1.0,
        )
    return rows


# ---------------------------------------------------------------------------
# Heuristic predictors
# ---------------------------------------------------------------------------

def _ranked(dialogue: Dialogue, query: Query, kind: str, seed: int) -> list[str]:
    """Candidates best-first under the heuristic; ties to lowest local id."""
    candidates = list(query.candidates)
    if not candidates:
        raise EmptyCandidates(f"query {query.query_id} has no candidates")

    if kind == "random":
        rng = SplitMix64(seed).derive(query.query_id)
        rng.shuffle(candidates)
        return candidates

    feats = extract_features(dialogue, query)
    by_count = sorted(
        range(len(candidates)), key=lambda r: (-feats[r, 0], candidates[r])
    )
    if kind == "freq":
        order = by_count
    elif kind == "exclusion":
        hidden = [r for r in by_count if feats[r, 2] == 0.0]
        shown = [r for r in by_count if feats[r, 2] != 0.0]
        order = hidden + shown if hidden else by_count
    elif kind == "first":
        first_spoken: dict[str, int] = {}
        for i, utt in enumerate(dialogue.utterances):
            if utt.speaker is not None:
                first_spoken.setdefault(utt.speaker.render(), i)
        order = sorted(
            range(len(candidates)),
            key=lambda r: (first_spoken.get(candidates[r], len(dialogue.utterances)),
                           candidates[r]),
        )
    else:
        raise ValueError(f"unknown heuristic {kind!r}")
    return [candidates[r] for r in order]


def _fill_variables(query: Query, ranked: list[str]) -> PredictionRecord:
    variables = sorted({var for _, var in query.masked})
    if variables == ["x"]:
        return PredictionRecord(query.query_id, {"x": ranked[0]})
    first = ranked[0]
    second = ranked[1] if len(ranked) > 1 else ranked[0]
    return PredictionRecord(query.query_id, {"x1": first, "x2": second})


def predict_heuristic(
    dialogue: Dialogue, query: Query, kind: str, seed: int = 0
) -> PredictionRecord:
    return _fill_variables(query, _ranked(dialogue, query, kind, seed))


# ---------------------------------------------------------------------------
# Log-linear ranker
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Instance:
    features: np.ndarray  # (n_candidates, N_FEATURES)
    gold_index: int


def _softmax(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max()
    e = np.exp(z)
    return e / e.sum()


def loss_and_gradient(
    weights: np.ndarray, instances: list[_Instance], l2: float
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over instances plus L2 (bias excluded), with gradient."""
    total = 0.0
    grad = np.zeros_like(weights)
    for inst in instances:
        scores = inst.features @ weights
        probs = _softmax(scores)
        total -= float(np.log(max(probs[inst.gold_index], 1e-300)))
        delta = probs.copy()
        delta[inst.gold_index] -= 1.0
        grad += inst.features.T @ delta
    n = max(1, len(instances))
    total /= n
    grad /= n
    penalty = weights.copy()
    penalty[-1] = 0.0
    # runaway weights overflow to inf here; callers detect that, so the
    # warning would only be noise
    with np.errstate(over="ignore"):
        total += 0.5 * l2 * float(penalty @ penalty)
    grad += l2 * penalty
    return total, grad


def _build_instances(corpus: Corpus, queries: list[Query]) -> tuple[list[_Instance], int]:
    instances = []
    skipped = 0
    for q in queries:
        dlg = corpus.dialogue(q.dialogue_key)
        if dlg is None or not q.candidates:
            skipped += 1
            continue
        feats = extract_features(dlg, q)
        for var in sorted(q.gold):
            ent = q.gold[var]
            if ent not in q.candidates:
                skipped += 1
                continue
            instances.append(_Instance(feats, q.candidates.index(ent)))
    return instances, skipped


def _accuracy(weights: np.ndarray, instances: list[_Instance]) -> float:
    if not instances:
        return 0.0
    hits = 0
    for inst in instances:
        scores = inst.features @ weights
        # np.argmax takes the first maximum: ties go to the lowest local id
        if int(np.argmax(scores)) == inst.gold_index:
            hits += 1
    return hits / len(instances)


def train_loglinear(
    corpus: Corpus,
    train_queries: list[Query],
    dev_queries: list[Query],
    hp: Hyperparameters,
    task: str | None = None,
) -> LogLinearModel:
    """Mini-batch gradient descent; returns the best-dev-accuracy weights."""
    train_inst, skipped = _build_instances(corpus, train_queries)
    if skipped:
        log.info("skipped %d training targets outside their candidate sets", skipped)
    if not train_inst:
        raise NoTrainableQueries("no training query has its answer in candidates")
    dev_inst, _ = _build_instances(corpus, dev_queries)

    task = task or (train_queries[0].task if train_queries else "sv")
    rng = SplitMix64(hp.seed)
    weights = np.zeros(N_FEATURES)
    best = (-1.0, weights.copy())

    order = list(range(len(train_inst)))
    for epoch in range(hp.epochs):
        rng.shuffle(order)
        for lo in range(0, len(order), hp.batch_size):
            batch = [train_inst[i] for i in order[lo:lo + hp.batch_size]]
            loss, grad = loss_and_gradient(weights, batch, hp.l2)
            if not np.isfinite(loss):
                raise DivergenceDetected(f"non-finite loss at epoch {epoch}")
            weights -= hp.learning_rate * grad
        dev_acc = _accuracy(weights, dev_inst or train_inst)
        log.info("epoch %d dev accuracy %.4f", epoch + 1, dev_acc)
        if dev_acc > best[0]:
            best = (dev_acc, weights.copy())

    final = best[1] if hp.epochs > 0 else weights
    return LogLinearModel(final, task, hp)


def predict_loglinear(
    model: LogLinearModel, dialogue: Dialogue, query: Query
) -> PredictionRecord:
    if model.weights.shape != (N_FEATURES,):
        raise DimensionMismatch(
            f"model dimension {model.weights.shape} != ({N_FEATURES},)"
        )
    if not query.candidates:
        raise EmptyCandidates(f"query {query.query_id} has no candidates")

    feats = extract_features(dialogue, query)
    scores = feats @ model.weights
    # best-first; ties to lowest local id (candidates are id-ordered)
    order = sorted(range(len(scores)), key=lambda r: (-scores[r], r))
    ranked = [query.candidates[r] for r in order]

    variables = sorted({var for _, var in query.masked})
    if variables == ["x"]:
        return PredictionRecord(query.query_id, {"x": ranked[0]})

    margin = model.hyperparameters.tv_margin
    if len(variables) == 1:
        gap = (
            scores[order[0]] - scores[order[1]] if len(order) > 1 else float("inf")
        )
        if margin > 0 and gap > margin:
            return PredictionRecord(query.query_id, {variables[0]: ranked[0]})
    second = ranked[1] if len(ranked) > 1 else ranked[0]
    return PredictionRecord(query.query_id, {"x1": ranked[0], "x2": second})


def predict_all(
    corpus: Corpus,
    queries: list[Query],
    kind: str,
    seed: int = 0,
    model: LogLinearModel | None = None,
) -> list[PredictionRecord]:
    preds = []
    for q in queries:
        dlg = corpus.dialogue(q.dialogue_key)
        if dlg is None:
            raise MalformedFile(f"query {q.query_id}: dialogue {q.dialogue_key} missing")
        if kind == "loglinear":
            if model is None:
                raise ValueError("loglinear prediction requires a model")
            preds.append(predict_loglinear(model, dlg, q))
        else:
            preds.append(predict_heuristic(dlg, q, kind, seed))
    return preds


# ---------------------------------------------------------------------------
# Model files (JSON; floats serialized with shortest round-trip rendering)
# ---------------------------------------------------------------------------

def save_model(model: LogLinearModel, path: Path | str) -> Path:
    path = Path(path)
    hp = model.hyperparameters
    doc = {
        "format": MODEL_FORMAT,
        "task": model.task,
        "hyperparameters": {
            "learning_rate": hp.learning_rate,
            "epochs": hp.epochs,
            "batch_size": hp.batch_size,
            "l2": hp.l2,
            "seed": hp.seed,
            "tv_margin": hp.tv_margin,
        },
        "feature_names": list(FEATURE_NAMES),
        "weights": [float(w) for w in model.weights],
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def load_model(path: Path | str) -> LogLinearModel:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    if doc.get("format") != MODEL_FORMAT:
        raise MalformedFile(f"{path}: unknown model format {doc.get('format')!r}")
    if doc.get("feature_names") != list(FEATURE_NAMES):
        raise DimensionMismatch(f"{path}: feature set does not match this build")
    hp = Hyperparameters(**doc["hyperparameters"])
    weights = np.array(doc["weights"], dtype=float)
    return LogLinearModel(weights, doc["task"], hp)
