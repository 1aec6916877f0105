"""Cloze query generation for the three passage-completion tasks.

Given a plot sentence with m mention occurrences:

* ``sv``  one query per occurrence; the occurrence is replaced by ``x``.
* ``mvs`` one query per distinct entity; every occurrence of that entity
  is replaced by ``x``.
* ``tv``  one query per ordered pair of distinct occurrences (i, j), with
  ``x1`` at i and ``x2`` at j, giving m*(m-1) queries; a plot with a single
  occurrence yields two queries, one using ``x1`` and one using ``x2``.
  The two masked occurrences may belong to the same entity.

Every query carries its gold variable assignments, the candidate set of
its dialogue (distinct entities appearing in the dialogue as a mention or
a speaker, ordered by local id), and ``answer_in_candidates``. Queries
whose answer lies outside the candidate set are kept and flagged; drop
them with ``drop_unanswerable`` when a clean subset is wanted.

Query ids are ``{task}:{plot_id}:{occurrence indices}:{variables}`` with
three-digit occurrence indices, e.g. ``tv:s01_e21_c01_p02:000-002:x1-x2``.
Ids sort in generation order and two runs over the same corpus produce
byte-identical query files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .corpus import Corpus, PlotSentence, is_entity_token
from .errors import IoFailure, MalformedFile, UnknownDialogue

VAR_X = "x"
VAR_X1 = "x1"
VAR_X2 = "x2"

TASKS = ("sv", "mvs", "tv")


@dataclass(frozen=True)
class Query:
    query_id: str
    task: str
    season: int
    episode: int
    scene: int
    plot_id: str
    tokens: tuple[str, ...]
    masked: tuple[tuple[int, str], ...]  # (token_position, variable name)
    gold: dict[str, str]                 # variable name -> "@entNN"
    candidates: tuple[str, ...] = field(default=())
    answer_in_candidates: bool = True

    @property
    def dialogue_key(self) -> tuple[int, int, int]:
        return (self.season, self.episode, self.scene)

    def unmask(self) -> tuple[str, ...]:
        """Source plot tokens, reconstructed by substituting gold back."""
        tokens = list(self.tokens)
        for pos, var in self.masked:
            tokens[pos] = self.gold[var]
        return tuple(tokens)


def build_candidates(corpus: Corpus, dialogue_key: tuple[int, int, int]) -> tuple[str, ...]:
    """Entities present in the dialogue, rendered, ordered by local id."""
    dlg = corpus.dialogue(dialogue_key)
    if dlg is None:
        raise UnknownDialogue(f"no dialogue with key {dialogue_key}")
    return tuple(f"@ent{lid:02d}" for lid in dlg.present_entities())


def _mask(plot: PlotSentence, assignments: list[tuple[int, str]]) -> tuple[tuple[str, ...], tuple[tuple[int, str], ...]]:
    """assignments: (occurrence index, variable name) pairs."""
    tokens = list(plot.tokens)
    masked = []
    for occ, var in assignments:
        pos, _ = plot.mentions[occ]
        tokens[pos] = var
        masked.append((pos, var))
    masked.sort()
    return tuple(tokens), tuple(masked)


def _qid(task: str, plot_id: str, occs: list[int], variables: list[str]) -> str:
    return ":".join(
        (task, plot_id, "-".join(f"{o:03d}" for o in occs), "-".join(variables))
    )


def _finish(corpus: Corpus, queries: list[Query]) -> list[Query]:
    cache: dict[tuple[int, int, int], tuple[str, ...]] = {}
    out = []
    for q in queries:
        cands = cache.get(q.dialogue_key)
        if cands is None:
            cands = build_candidates(corpus, q.dialogue_key)
            cache[q.dialogue_key] = cands
        ok = all(ent in cands for ent in q.gold.values())
        out.append(replace(q, candidates=cands, answer_in_candidates=ok))
    out.sort(key=lambda q: q.query_id)
    return out


def generate_sv(corpus: Corpus) -> list[Query]:
    queries = []
    for plot in corpus.plots:
        for occ, (pos, ent) in enumerate(plot.mentions):
            tokens, masked = _mask(plot, [(occ, VAR_X)])
            queries.append(
                Query(
                    _qid("sv", plot.plot_id, [occ], [VAR_X]),
                    "sv", plot.season, plot.episode, plot.scene, plot.plot_id,
                    tokens, masked, {VAR_X: ent.render()},
                )
            )
    return _finish(corpus, queries)


def generate_mvs(corpus: Corpus) -> list[Query]:
    queries = []
    for plot in corpus.plots:
        seen: dict[int, list[int]] = {}
        order: list[int] = []
        for occ, (_, ent) in enumerate(plot.mentions):
            if ent.local_id not in seen:
                seen[ent.local_id] = []
                order.append(ent.local_id)
            seen[ent.local_id].append(occ)
        for lid in order:
            occs = seen[lid]
            tokens, masked = _mask(plot, [(o, VAR_X) for o in occs])
            queries.append(
                Query(
                    _qid("mvs", plot.plot_id, occs, [VAR_X]),
                    "mvs", plot.season, plot.episode, plot.scene, plot.plot_id,
                    tokens, masked, {VAR_X: f"@ent{lid:02d}"},
                )
            )
    return _finish(corpus, queries)


def generate_tv(corpus: Corpus) -> list[Query]:
    queries = []
    for plot in corpus.plots:
        m = len(plot.mentions)
        if m == 1:
            for var in (VAR_X1, VAR_X2):
                tokens, masked = _mask(plot, [(0, var)])
                queries.append(
                    Query(
                        _qid("tv", plot.plot_id, [0], [var]),
                        "tv", plot.season, plot.episode, plot.scene, plot.plot_id,
                        tokens, masked, {var: plot.mentions[0][1].render()},
                    )
                )
            continue
        for i in range(m):
            for j in range(m):
                if i == j:
                    continue
                tokens, masked = _mask(plot, [(i, VAR_X1), (j, VAR_X2)])
                gold = {
                    VAR_X1: plot.mentions[i][1].render(),
                    VAR_X2: plot.mentions[j][1].render(),
                }
                queries.append(
                    Query(
                        _qid("tv", plot.plot_id, [i, j], [VAR_X1, VAR_X2]),
                        "tv", plot.season, plot.episode, plot.scene, plot.plot_id,
                        tokens, masked, gold,
                    )
                )
    return _finish(corpus, queries)


GENERATORS = {"sv": generate_sv, "mvs": generate_mvs, "tv": generate_tv}


def generate(corpus: Corpus, task: str) -> list[Query]:
    if task not in GENERATORS:
        raise ValueError(f"unknown task {task!r}")
    return GENERATORS[task](corpus)


def drop_unanswerable(queries: list[Query]) -> list[Query]:
    return [q for q in queries if q.answer_in_candidates]


def query_entity_tokens(query: Query) -> set[str]:
    """Entity renderings still visible (unmasked) in the query text."""
    return {t for t in query.tokens if is_entity_token(t)}


# ---------------------------------------------------------------------------
# Query files: queries_{task}.jsonl
# ---------------------------------------------------------------------------

def query_file_name(task: str) -> str:
    return f"queries_{task}.jsonl"


def _query_record(q: Query) -> dict:
    return {
        "query_id": q.query_id,
        "task": q.task,
        "season": q.season,
        "episode": q.episode,
        "scene": q.scene,
        "plot_id": q.plot_id,
        "tokens": list(q.tokens),
        "masked": [[pos, var] for pos, var in q.masked],
        "gold": {var: q.gold[var] for var in sorted(q.gold)},
        "candidates": list(q.candidates),
        "answer_in_candidates": q.answer_in_candidates,
    }


def write_queries(queries: list[Query], path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for q in queries:
                f.write(json.dumps(_query_record(q), ensure_ascii=False,
                                   separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_queries(path: Path | str) -> list[Query]:
    path = Path(path)
    queries = []
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    queries.append(
                        Query(
                            rec["query_id"], rec["task"], int(rec["season"]),
                            int(rec["episode"]), int(rec["scene"]), rec["plot_id"],
                            tuple(rec["tokens"]),
                            tuple((int(p), str(v)) for p, v in rec["masked"]),
                            dict(rec["gold"]),
                            tuple(rec["candidates"]),
                            bool(rec["answer_in_candidates"]),
                        )
                    )
                except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
                    raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return queries
