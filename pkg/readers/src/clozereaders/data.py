"""Interchange file readers and tensor encoding.

File shapes (the contract with the benchmark toolkit):

``dialogues.jsonl``, one scene per line::

    {"season":1,"episode":2,"scene":3,"entities":[[0,"Name"],[1,null]],
     "utterances":[{"index":1,"speaker":"@ent00","tokens":[...],
                    "mentions":[[start,stop,local_id],...]}]}

``queries_<task>.jsonl``: query_id, task, scene coordinates, plot_id,
tokens (with ``x``/``x1``/``x2`` variables), masked positions, gold
assignment, candidates, answer_in_candidates.

``split_<policy>.jsonl``: a ``{"policy":...}`` header line, then
``{"query_id":...,"split":...}`` records.

Entity placeholders ``@entNN`` stay ordinary vocabulary items; the class
label of a candidate is its local id parsed from the placeholder. The
speaker token is prepended to each utterance before encoding, narrator
lines keep their ``-`` marker.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import torch

from .errors import IoFailure, MalformedFile

PAD, UNK, CLS, SEP = "<pad>", "<unk>", "<cls>", "<sep>"
NARRATOR = "-"
SPLITS = ("train", "dev", "test")
TASKS = ("sv", "mvs", "tv")
HEAD_VARS = {"sv": ("x",), "mvs": ("x",), "tv": ("x1", "x2")}

UTTERANCE_CAP = 64  # tokens kept per utterance, speaker included

_ENTITY = re.compile(r"^@ent(\d{2,})$")


def label_of(token: str) -> int | None:
    """Local-id class of an entity placeholder, None for other tokens."""
    m = _ENTITY.match(token)
    return int(m.group(1)) if m else None


def entity_token(label: int) -> str:
    return f"@ent{label:02d}"


# ---------------------------------------------------------------------------
# Records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scene:
    season: int
    episode: int
    scene: int
    speakers: tuple[str, ...]  # one per utterance; NARRATOR for none
    utterances: tuple[tuple[str, ...], ...]
    table_ids: tuple[int, ...]

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.season, self.episode, self.scene)


@dataclass(frozen=True)
class QueryRec:
    query_id: str
    task: str
    season: int
    episode: int
    scene: int
    plot_id: str
    tokens: tuple[str, ...]
    masked: tuple[tuple[int, str], ...]
    gold: dict
    candidates: tuple[str, ...]
    answer_in_candidates: bool

    @property
    def dialogue_key(self) -> tuple[int, int, int]:
        return (self.season, self.episode, self.scene)

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(sorted({var for _, var in self.masked}))


def _lines(path: Path):
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if line.strip():
                    yield lineno, line
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def read_dialogues(path: Path | str) -> list[Scene]:
    path = Path(path)
    scenes: list[Scene] = []
    seen = set()
    for lineno, line in _lines(path):
        try:
            rec = json.loads(line)
            speakers, utts = [], []
            for u in rec["utterances"]:
                speakers.append(str(u["speaker"]))
                utts.append(tuple(str(t) for t in u["tokens"]))
            scene = Scene(
                int(rec["season"]), int(rec["episode"]), int(rec["scene"]),
                tuple(speakers), tuple(utts),
                tuple(int(i) for i, _ in rec["entities"]),
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
        if scene.key in seen:
            raise MalformedFile(f"{path}:{lineno}: duplicate scene {scene.key}")
        seen.add(scene.key)
        scenes.append(scene)
    if not scenes:
        raise MalformedFile(f"{path}: no dialogues")
    return scenes


def read_queries(path: Path | str) -> list[QueryRec]:
    path = Path(path)
    queries: list[QueryRec] = []
    for lineno, line in _lines(path):
        try:
            rec = json.loads(line)
            q = QueryRec(
                str(rec["query_id"]), str(rec["task"]), int(rec["season"]),
                int(rec["episode"]), int(rec["scene"]), str(rec["plot_id"]),
                tuple(str(t) for t in rec["tokens"]),
                tuple((int(p), str(v)) for p, v in rec["masked"]),
                {str(k): str(v) for k, v in rec["gold"].items()},
                tuple(str(c) for c in rec["candidates"]),
                bool(rec["answer_in_candidates"]),
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
        if q.task not in TASKS:
            raise MalformedFile(f"{path}:{lineno}: unknown task {q.task!r}")
        if queries and q.task != queries[0].task:
            raise MalformedFile(
                f"{path}:{lineno}: mixed tasks {queries[0].task!r} and {q.task!r}"
            )
        queries.append(q)
    if not queries:
        raise MalformedFile(f"{path}: no queries")
    return queries


def read_split(path: Path | str) -> dict[str, str]:
    path = Path(path)
    assignment: dict[str, str] = {}
    saw_header = False
    for lineno, line in _lines(path):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
        if not saw_header:
            if "policy" not in rec:
                raise MalformedFile(f"{path}:1: missing policy header")
            saw_header = True
            continue
        try:
            qid, dest = str(rec["query_id"]), str(rec["split"])
        except (KeyError, TypeError) as exc:
            raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
        if dest not in SPLITS:
            raise MalformedFile(f"{path}:{lineno}: bad split {dest!r}")
        if qid in assignment:
            raise MalformedFile(f"{path}:{lineno}: duplicate query_id {qid}")
        assignment[qid] = dest
    if not saw_header:
        raise MalformedFile(f"{path}: empty split file")
    return assignment


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

class Vocab:
    """Token ids; specials first, the rest in sorted order so vocabulary
    construction is independent of file ordering."""

    SPECIALS = (PAD, UNK, CLS, SEP)

    def __init__(self, ordered_tokens: list[str]):
        if tuple(ordered_tokens[:4]) != self.SPECIALS:
            raise MalformedFile("vocabulary must start with the special tokens")
        self._ids = {t: i for i, t in enumerate(ordered_tokens)}
        self._ordered = list(ordered_tokens)

    @classmethod
    def build(cls, tokens) -> "Vocab":
        rest = sorted(set(tokens) - set(cls.SPECIALS))
        return cls(list(cls.SPECIALS) + rest)

    def __len__(self) -> int:
        return len(self._ordered)

    def id(self, token: str) -> int:
        return self._ids.get(token, 1)  # UNK

    def encode(self, tokens) -> list[int]:
        return [self.id(t) for t in tokens]

    def tokens(self) -> list[str]:
        return list(self._ordered)


def vocab_tokens(scenes: list[Scene], queries: list[QueryRec]):
    for s in scenes:
        yield from s.speakers
        for utt in s.utterances:
            yield from utt
    for q in queries:
        yield from q.tokens


# ---------------------------------------------------------------------------
# Tensor encoding
# ---------------------------------------------------------------------------

@dataclass
class Example:
    query_id: str
    task: str
    query: list[int]
    doc: list[int]               # flat utterance stream, speaker-prefixed
    utts: list[list[int]]        # per-utterance streams, speaker-prefixed
    joint: list[int]             # <cls> query <sep> doc <sep>
    candidates: tuple[int, ...]  # class labels of the candidate set
    cand_tokens: dict            # class label -> original placeholder
    gold_labels: dict            # variable -> class label (may be off-list)
    variables: tuple[str, ...]


def encode_examples(
    scenes: list[Scene],
    queries: list[QueryRec],
    vocab: Vocab,
    max_len: int,
) -> list[Example]:
    by_key = {s.key: s for s in scenes}
    examples = []
    for q in queries:
        scene = by_key.get(q.dialogue_key)
        if scene is None:
            raise MalformedFile(
                f"query {q.query_id}: scene {q.dialogue_key} not in dialogues file"
            )
        if not q.candidates:
            raise MalformedFile(f"query {q.query_id}: empty candidate set")
        utts = []
        doc: list[int] = []
        for speaker, tokens in zip(scene.speakers, scene.utterances):
            ids = vocab.encode((speaker, *tokens))[:UTTERANCE_CAP]
            utts.append(ids)
            doc.extend(ids)
        doc = doc[:max_len]
        query_ids = vocab.encode(q.tokens)[:max_len]
        # transformer budget: keep the whole query, truncate the document
        doc_budget = max(1, max_len - len(query_ids) - 3)
        joint = ([vocab.id(CLS)] + query_ids + [vocab.id(SEP)]
                 + doc[:doc_budget] + [vocab.id(SEP)])
        cand_labels = []
        cand_tokens = {}
        for c in q.candidates:
            label = label_of(c)
            if label is None:
                raise MalformedFile(
                    f"query {q.query_id}: candidate {c!r} is not an entity token"
                )
            cand_labels.append(label)
            cand_tokens[label] = c
        gold_labels = {}
        for var, ent in q.gold.items():
            label = label_of(ent)
            if label is None:
                raise MalformedFile(
                    f"query {q.query_id}: gold {ent!r} is not an entity token"
                )
            gold_labels[var] = label
        examples.append(Example(
            q.query_id, q.task, query_ids, doc, utts, joint,
            tuple(cand_labels), cand_tokens, gold_labels, q.variables,
        ))
    return examples


def n_classes_for(scenes: list[Scene], examples: list[Example]) -> int:
    top = 0
    for s in scenes:
        top = max(top, max(s.table_ids, default=0))
    for ex in examples:
        top = max(top, max(ex.candidates), *ex.gold_labels.values())
    return top + 1


@dataclass
class Batch:
    query_ids: list[str]
    query: torch.Tensor       # [B, Lq] long
    query_len: torch.Tensor   # [B] long
    doc: torch.Tensor         # [B, Ld] long
    doc_len: torch.Tensor     # [B] long
    utts: torch.Tensor        # [B, U, Lu] long
    utt_len: torch.Tensor     # [B, U] long, 0 on padded utterances
    joint: torch.Tensor       # [B, Lj] long
    joint_pad: torch.Tensor   # [B, Lj] bool, True on padding
    cand_mask: torch.Tensor   # [B, K] bool
    labels: torch.Tensor      # [B, n_heads] long, -100 where untrainable
    examples: list[Example]

    def __len__(self) -> int:
        return len(self.query_ids)


def _pad2(rows: list[list[int]]) -> torch.Tensor:
    width = max(len(r) for r in rows)
    out = torch.zeros(len(rows), width, dtype=torch.long)
    for i, r in enumerate(rows):
        out[i, : len(r)] = torch.tensor(r, dtype=torch.long)
    return out


def collate(examples: list[Example], n_classes: int, task: str) -> Batch:
    head_vars = HEAD_VARS[task]
    n_utt = max(len(ex.utts) for ex in examples)
    utt_width = max(len(u) for ex in examples for u in ex.utts)
    utts = torch.zeros(len(examples), n_utt, utt_width, dtype=torch.long)
    utt_len = torch.zeros(len(examples), n_utt, dtype=torch.long)
    cand_mask = torch.zeros(len(examples), n_classes, dtype=torch.bool)
    labels = torch.full((len(examples), len(head_vars)), -100, dtype=torch.long)
    for i, ex in enumerate(examples):
        for j, u in enumerate(ex.utts):
            utts[i, j, : len(u)] = torch.tensor(u, dtype=torch.long)
            utt_len[i, j] = len(u)
        for label in ex.candidates:
            cand_mask[i, label] = True
        for h, var in enumerate(head_vars):
            label = ex.gold_labels.get(var)
            # only in-candidate golds are trainable targets
            if label is not None and label < n_classes and cand_mask[i, label]:
                labels[i, h] = label
    joint = _pad2([ex.joint for ex in examples])
    return Batch(
        query_ids=[ex.query_id for ex in examples],
        query=_pad2([ex.query for ex in examples]),
        query_len=torch.tensor([len(ex.query) for ex in examples]),
        doc=_pad2([ex.doc for ex in examples]),
        doc_len=torch.tensor([len(ex.doc) for ex in examples]),
        utts=utts,
        utt_len=utt_len,
        joint=joint,
        joint_pad=joint.eq(0),
        cand_mask=cand_mask,
        labels=labels,
        examples=examples,
    )
