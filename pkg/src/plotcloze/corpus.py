"""Corpus model, canonical interchange files, and corpus statistics.

The in-memory corpus is a validated, immutable view of scene-scoped
multiparty dialogues plus plot-summary sentences aligned to them:

    seasons > episodes > scenes (one Dialogue per scene) > utterances

Entity anonymization contract: within one dialogue every entity carries a
small local id rendered exactly ``@ent`` + two-digit zero-padded id
("@ent00", "@ent04", ...). Anonymized token streams contain that rendering
as a single token at every mention position. The dialogue's entity table
maps local ids back to optional global character ids and is a bijection
over the entities present in the dialogue and its plots.

Canonical interchange format (all downstream stages read only this):

``dialogues.jsonl`` one dialogue per line, sorted by (season, episode,
scene), keys in this fixed order::

    {"season": 1, "episode": 21, "scene": 1,
     "entities": [[0, "char_a"], [1, null], ...],     # sorted by local id
     "utterances": [{"index": 1, "speaker": "@ent04", "tokens": [...],
                     "mentions": [[start, stop, local_id], ...]}, ...]}

``plots.jsonl`` one plot sentence per line, sorted by plot_id::

    {"plot_id": "s01_e21_c01_p01", "season": 1, "episode": 21, "scene": 1,
     "tokens": [...], "mentions": [[position, local_id], ...]}

Narrator lines use speaker ``"-"``. Files are UTF-8 with LF endings and no
insignificant whitespace, so identical corpora serialize byte-identically.

Statistics counting rules (fixed so Table-style reports are deterministic):
tokens are counted on the anonymized stream, narrator lines included;
mentions count in-text mention occurrences only (speakers are not
mentions); entities per dialogue counts distinct entities appearing as an
in-text mention or as a non-narrator speaker; entities per plot counts
distinct entities among the plot's mentions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from statistics import mean

from .errors import BadSpan, DanglingPlot, EmptyCorpus, IoFailure, MalformedFile

NARRATOR = "-"

DIALOGUES_FILE = "dialogues.jsonl"
PLOTS_FILE = "plots.jsonl"


@dataclass(frozen=True, order=True)
class EntityRef:
    """An entity as seen from inside one dialogue."""

    local_id: int
    global_id: str | None = field(default=None, compare=False)

    def render(self) -> str:
        if self.local_id < 0:
            raise ValueError(f"negative local id {self.local_id}")
        return f"@ent{self.local_id:02d}"

    @staticmethod
    def parse(token: str, global_id: str | None = None) -> "EntityRef":
        if not token.startswith("@ent") or not token[4:].isdigit() or len(token) < 6:
            raise ValueError(f"not an entity token: {token!r}")
        return EntityRef(int(token[4:]), global_id)


def is_entity_token(token: str) -> bool:
    return token.startswith("@ent") and len(token) >= 6 and token[4:].isdigit()


@dataclass(frozen=True)
class Utterance:
    """One turn: speaker is an EntityRef, or None for narrator lines."""

    index: int
    speaker: EntityRef | None
    tokens: tuple[str, ...]
    mentions: tuple[tuple[int, int, EntityRef], ...]  # (start, stop, entity)


@dataclass(frozen=True)
class Dialogue:
    season: int
    episode: int
    scene: int
    utterances: tuple[Utterance, ...]
    entity_table: dict[int, str | None] = field(default_factory=dict)

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.season, self.episode, self.scene)

    @property
    def key_str(self) -> str:
        return f"s{self.season:02d}_e{self.episode:02d}_c{self.scene:02d}"

    def present_entities(self) -> list[int]:
        """Local ids appearing as an in-text mention or a speaker, sorted."""
        ids = set()
        for utt in self.utterances:
            if utt.speaker is not None:
                ids.add(utt.speaker.local_id)
            for _, _, ent in utt.mentions:
                ids.add(ent.local_id)
        return sorted(ids)


@dataclass(frozen=True)
class PlotSentence:
    plot_id: str
    season: int
    episode: int
    scene: int
    tokens: tuple[str, ...]
    mentions: tuple[tuple[int, EntityRef], ...]  # (token_position, entity)

    @property
    def dialogue_key(self) -> tuple[int, int, int]:
        return (self.season, self.episode, self.scene)


@dataclass(frozen=True)
class CorpusStats:
    n_dialogues: int
    n_plots: int
    avg_utterances_per_dialogue: float
    avg_tokens_per_dialogue: float
    avg_tokens_per_plot: float
    avg_mentions_per_dialogue: float
    avg_mentions_per_plot: float
    avg_entities_per_dialogue: float
    avg_entities_per_plot: float
    max_entities_per_dialogue: int
    max_entities_per_plot: int


class Corpus:
    """Validated, immutable container of dialogues and plot sentences."""

    def __init__(self, dialogues: list[Dialogue], plots: list[PlotSentence]):
        self.dialogues = tuple(sorted(dialogues, key=lambda d: d.key))
        self.plots = tuple(sorted(plots, key=lambda p: p.plot_id))
        self._by_key = {d.key: d for d in self.dialogues}
        self._plots_by_id = {p.plot_id: p for p in self.plots}
        self._validate()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.dialogues == other.dialogues and self.plots == other.plots

    def dialogue(self, key: tuple[int, int, int]) -> Dialogue | None:
        return self._by_key.get(key)

    def plot(self, plot_id: str) -> PlotSentence | None:
        return self._plots_by_id.get(plot_id)

    def plots_for(self, key: tuple[int, int, int]) -> list[PlotSentence]:
        return [p for p in self.plots if p.dialogue_key == key]

    def _validate(self) -> None:
        if len(self._by_key) != len(self.dialogues):
            keys = [d.key for d in self.dialogues]
            dup = sorted(k for k in set(keys) if keys.count(k) > 1)
            raise MalformedFile(f"duplicate dialogue keys: {dup}")
        if len(self._plots_by_id) != len(self.plots):
            raise MalformedFile("duplicate plot_id values")

        for dlg in self.dialogues:
            known = set(dlg.entity_table)
            for i, utt in enumerate(dlg.utterances, start=1):
                if utt.index != i:
                    raise MalformedFile(
                        f"{dlg.key_str}: utterance indices not contiguous from 1"
                    )
                if (
                    known
                    and utt.speaker is not None
                    and utt.speaker.local_id not in known
                ):
                    raise MalformedFile(
                        f"{dlg.key_str} u{utt.index}: speaker "
                        f"{utt.speaker.render()} missing from entity table"
                    )
                self._check_spans(dlg, utt, known)
            globals_seen = [g for g in dlg.entity_table.values() if g is not None]
            if len(globals_seen) != len(set(globals_seen)):
                raise MalformedFile(
                    f"{dlg.key_str}: entity table maps two local ids to one global id"
                )

        for plot in self.plots:
            dlg = self._by_key.get(plot.dialogue_key)
            if dlg is None:
                raise DanglingPlot(
                    f"plot {plot.plot_id} references missing dialogue "
                    f"{plot.dialogue_key}"
                )
            for pos, ent in plot.mentions:
                if not 0 <= pos < len(plot.tokens):
                    raise BadSpan(
                        f"plot {plot.plot_id}: mention position {pos} out of bounds"
                    )
                if plot.tokens[pos] != ent.render():
                    raise BadSpan(
                        f"plot {plot.plot_id}: token at {pos} is "
                        f"{plot.tokens[pos]!r}, expected {ent.render()!r}"
                    )
                if dlg.entity_table and ent.local_id not in dlg.entity_table:
                    raise MalformedFile(
                        f"plot {plot.plot_id}: entity {ent.render()} missing from "
                        f"dialogue entity table"
                    )

    @staticmethod
    def _check_spans(dlg: Dialogue, utt: Utterance, known: set[int]) -> None:
        prev_stop = -1
        for start, stop, ent in sorted(utt.mentions):
            if not (0 <= start < stop <= len(utt.tokens)):
                raise BadSpan(
                    f"{dlg.key_str} u{utt.index}: span [{start},{stop}) out of bounds"
                )
            if start < prev_stop:
                raise BadSpan(
                    f"{dlg.key_str} u{utt.index}: overlapping mention spans"
                )
            prev_stop = stop
            rendered = ent.render()
            for pos in range(start, stop):
                if utt.tokens[pos] != rendered:
                    raise BadSpan(
                        f"{dlg.key_str} u{utt.index}: token at {pos} is "
                        f"{utt.tokens[pos]!r}, expected {rendered!r}"
                    )
            if known and ent.local_id not in known:
                raise MalformedFile(
                    f"{dlg.key_str} u{utt.index}: entity {rendered} missing from "
                    f"entity table"
                )


# ---------------------------------------------------------------------------
# Canonical interchange
# ---------------------------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _dialogue_record(dlg: Dialogue) -> dict:
    return {
        "season": dlg.season,
        "episode": dlg.episode,
        "scene": dlg.scene,
        "entities": [[lid, dlg.entity_table[lid]] for lid in sorted(dlg.entity_table)],
        "utterances": [
            {
                "index": utt.index,
                "speaker": NARRATOR if utt.speaker is None else utt.speaker.render(),
                "tokens": list(utt.tokens),
                "mentions": [
                    [start, stop, ent.local_id]
                    for start, stop, ent in sorted(utt.mentions)
                ],
            }
            for utt in dlg.utterances
        ],
    }


def _plot_record(plot: PlotSentence) -> dict:
    return {
        "plot_id": plot.plot_id,
        "season": plot.season,
        "episode": plot.episode,
        "scene": plot.scene,
        "tokens": list(plot.tokens),
        "mentions": [[pos, ent.local_id] for pos, ent in sorted(plot.mentions)],
    }


def export_canonical(corpus: Corpus, out_dir: Path | str) -> list[Path]:
    """Write dialogues.jsonl and plots.jsonl; returns the paths written."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        dpath = out / DIALOGUES_FILE
        ppath = out / PLOTS_FILE
        with open(dpath, "w", encoding="utf-8", newline="\n") as f:
            for dlg in corpus.dialogues:
                f.write(_dumps(_dialogue_record(dlg)) + "\n")
        with open(ppath, "w", encoding="utf-8", newline="\n") as f:
            for plot in corpus.plots:
                f.write(_dumps(_plot_record(plot)) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write canonical files under {out}: {exc}") from exc
    return [dpath, ppath]


def _load_jsonl(path: Path) -> list[dict]:
    records = []
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return records


def import_canonical(in_dir: Path | str) -> Corpus:
    """Read the canonical files back into a validated Corpus."""
    src = Path(in_dir)
    dpath = src / DIALOGUES_FILE
    ppath = src / PLOTS_FILE
    if not dpath.exists():
        raise MalformedFile(f"{dpath}: no such file")

    dialogues = []
    for rec in _load_jsonl(dpath):
        try:
            table = {int(lid): gid for lid, gid in rec["entities"]}
            utterances = []
            for u in rec["utterances"]:
                speaker = (
                    None
                    if u["speaker"] == NARRATOR
                    else EntityRef.parse(u["speaker"], table.get(int(u["speaker"][4:])))
                )
                mentions = tuple(
                    (int(a), int(b), EntityRef(int(lid), table.get(int(lid))))
                    for a, b, lid in u["mentions"]
                )
                utterances.append(
                    Utterance(int(u["index"]), speaker, tuple(u["tokens"]), mentions)
                )
            dialogues.append(
                Dialogue(
                    int(rec["season"]),
                    int(rec["episode"]),
                    int(rec["scene"]),
                    tuple(utterances),
                    table,
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFile(f"{dpath}: bad dialogue record: {exc}") from exc

    tables = {d.key: d.entity_table for d in dialogues}
    plots = []
    if ppath.exists():
        for rec in _load_jsonl(ppath):
            try:
                key = (int(rec["season"]), int(rec["episode"]), int(rec["scene"]))
                table = tables.get(key, {})
                mentions = tuple(
                    (int(pos), EntityRef(int(lid), table.get(int(lid))))
                    for pos, lid in rec["mentions"]
                )
                plots.append(
                    PlotSentence(
                        str(rec["plot_id"]), key[0], key[1], key[2],
                        tuple(rec["tokens"]), mentions,
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedFile(f"{ppath}: bad plot record: {exc}") from exc

    return Corpus(dialogues, plots)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

def compute_stats(corpus: Corpus) -> CorpusStats:
    if not corpus.dialogues:
        raise EmptyCorpus("corpus has no dialogues")

    utt_counts = [len(d.utterances) for d in corpus.dialogues]
    tok_counts = [sum(len(u.tokens) for u in d.utterances) for d in corpus.dialogues]
    mention_counts = [
        sum(len(u.mentions) for u in d.utterances) for d in corpus.dialogues
    ]
    entity_counts = [len(d.present_entities()) for d in corpus.dialogues]

    if corpus.plots:
        plot_toks = [len(p.tokens) for p in corpus.plots]
        plot_mentions = [len(p.mentions) for p in corpus.plots]
        plot_entities = [len({e.local_id for _, e in p.mentions}) for p in corpus.plots]
    else:
        plot_toks = plot_mentions = plot_entities = [0]

    return CorpusStats(
        n_dialogues=len(corpus.dialogues),
        n_plots=len(corpus.plots),
        avg_utterances_per_dialogue=mean(utt_counts),
        avg_tokens_per_dialogue=mean(tok_counts),
        avg_tokens_per_plot=mean(plot_toks),
        avg_mentions_per_dialogue=mean(mention_counts),
        avg_mentions_per_plot=mean(plot_mentions),
        avg_entities_per_dialogue=mean(entity_counts),
        avg_entities_per_plot=mean(plot_entities),
        max_entities_per_dialogue=max(entity_counts),
        max_entities_per_plot=max(plot_entities),
    )


def format_stats_table(stats: CorpusStats) -> str:
    """Fixed-format report; averages rendered to one decimal."""
    rows = [
        ("# of dialogs", f"{stats.n_dialogues:,}"),
        ("# of plots", f"{stats.n_plots:,}"),
        ("Avg. # of utterances per dialog", f"{stats.avg_utterances_per_dialogue:.1f}"),
        (
            "Avg. # of tokens per dialog/plot",
            f"{stats.avg_tokens_per_dialogue:.1f} / {stats.avg_tokens_per_plot:.1f}",
        ),
        (
            "Avg. # of mentions per dialog/plot",
            f"{stats.avg_mentions_per_dialogue:.1f} / {stats.avg_mentions_per_plot:.1f}",
        ),
        (
            "Avg. # of entities per dialog/plot",
            f"{stats.avg_entities_per_dialogue:.1f} / {stats.avg_entities_per_plot:.1f}",
        ),
        (
            "Max # of entities per dialog/plot",
            f"{stats.max_entities_per_dialogue} / {stats.max_entities_per_plot}",
        ),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def stats_to_dict(stats: CorpusStats) -> dict:
    return {
        "n_dialogues": stats.n_dialogues,
        "n_plots": stats.n_plots,
        "avg_utterances_per_dialogue": stats.avg_utterances_per_dialogue,
        "avg_tokens_per_dialogue": stats.avg_tokens_per_dialogue,
        "avg_tokens_per_plot": stats.avg_tokens_per_plot,
        "avg_mentions_per_dialogue": stats.avg_mentions_per_dialogue,
        "avg_mentions_per_plot": stats.avg_mentions_per_plot,
        "avg_entities_per_dialogue": stats.avg_entities_per_dialogue,
        "avg_entities_per_plot": stats.avg_entities_per_plot,
        "max_entities_per_dialogue": stats.max_entities_per_dialogue,
        "max_entities_per_plot": stats.max_entities_per_plot,
    }
