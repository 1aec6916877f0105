"""Importer for raw transcript and plot-summary source files.

Transcript layout: one JSON file per season (``*.json`` under the
transcript root, processed in sorted filename order), shaped like the
public character-annotated transcript releases::

    {"season_id": "s01",
     "episodes": [
       {"episode_id": "s01_e01",
        "scenes": [
          {"scene_id": "s01_e01_c01",
           "utterances": [
             {"utterance_id": "s01_e01_c01_u001",
              "speakers": ["Lee Ward"],
              "tokens": [["Hey", "!"], ["Come", "in", "."]],
              "character_entities": [[[0, 1, "Lee Ward"]], []]},
             ...]}]}]}

``tokens`` holds one token list per sentence; ``character_entities`` holds,
per sentence, ``[start, stop, name]`` token spans naming the character the
span refers to. Labels wrapped in ``#`` (collective or non-person markers)
are ignored. Sentences are concatenated into one token stream per
utterance. An empty ``speakers`` list marks a narrator line.

Plot layout: every ``*.jsonl`` file under the plot root, one sentence per
line::

    {"season": 1, "episode": 21, "scene": 1, "sentence": 1,
     "tokens": ["Lee", "Ward", "buys", "a", "mop", "."],
     "mentions": [[0, 2, "Lee Ward"]]}

Import performs anonymization: each mention span collapses to a single
``@entNN`` token. Local ids are assigned per dialogue by first appearance,
scanning utterances in order (speaker first, then mentions left to right),
then the dialogue's plot sentences in plot_id order; entities appearing
only in plots extend the same table, so a plot can reference a character
the dialogue never shows (kept, and later surfaced as an unanswerable
query rather than dropped).
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .corpus import Corpus, Dialogue, EntityRef, PlotSentence, Utterance
from .errors import BadSpan, DanglingPlot, MalformedFile

_SCENE_ID = re.compile(r"^s(\d+)_e(\d+)_c(\d+)$")


def _read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MalformedFile(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


class _RawUtterance:
    __slots__ = ("speaker", "tokens", "spans")

    def __init__(self, speaker: str | None, tokens: list[str],
                 spans: list[tuple[int, int, str]]):
        self.speaker = speaker
        self.tokens = tokens
        self.spans = spans


def _flatten_utterance(path: Path, uid: str, rec: dict) -> _RawUtterance:
    sentences = rec.get("tokens")
    if not isinstance(sentences, list):
        raise MalformedFile(f"{path}: utterance {uid}: missing token sentences")
    entities = rec.get("character_entities")
    if entities is None:
        entities = [[] for _ in sentences]
    if len(entities) != len(sentences):
        raise MalformedFile(
            f"{path}: utterance {uid}: {len(entities)} entity sentence groups "
            f"for {len(sentences)} sentences"
        )

    tokens: list[str] = []
    spans: list[tuple[int, int, str]] = []
    for sent, groups in zip(sentences, entities):
        offset = len(tokens)
        tokens.extend(str(t) for t in sent)
        for g in groups:
            if not isinstance(g, list) or len(g) < 3:
                raise MalformedFile(f"{path}: utterance {uid}: bad entity span {g!r}")
            start, stop, name = int(g[0]), int(g[1]), str(g[2])
            if name.startswith("#"):
                continue
            if not (0 <= start < stop <= len(sent)):
                raise BadSpan(
                    f"{path}: utterance {uid}: span [{start},{stop}) out of bounds "
                    f"for {len(sent)}-token sentence"
                )
            spans.append((offset + start, offset + stop, name))

    speakers = rec.get("speakers", [])
    speaker = str(speakers[0]) if speakers else None
    return _RawUtterance(speaker, tokens, spans)


def _check_disjoint(path: Path, where: str, spans: list[tuple[int, int, str]]) -> None:
    prev = -1
    for start, stop, _ in sorted(spans):
        if start < prev:
            raise BadSpan(f"{path}: {where}: overlapping mention spans")
        prev = stop


class _EntityNumbering:
    """First-appearance local-id assignment for one dialogue."""

    def __init__(self):
        self.ids: dict[str, int] = {}

    def get(self, name: str) -> int:
        if name not in self.ids:
            self.ids[name] = len(self.ids)
        return self.ids[name]

    def table(self) -> dict[int, str | None]:
        return {lid: name for name, lid in self.ids.items()}


def _anonymize_utterance(
    raw: _RawUtterance, index: int, numbering: _EntityNumbering
) -> Utterance:
    speaker = None
    if raw.speaker is not None:
        speaker = EntityRef(numbering.get(raw.speaker), raw.speaker)

    # Collapse each span to one @entNN token, left to right.
    out_tokens: list[str] = []
    out_mentions: list[tuple[int, int, EntityRef]] = []
    cursor = 0
    for start, stop, name in sorted(raw.spans):
        out_tokens.extend(raw.tokens[cursor:start])
        ent = EntityRef(numbering.get(name), name)
        pos = len(out_tokens)
        out_tokens.append(ent.render())
        out_mentions.append((pos, pos + 1, ent))
        cursor = stop
    out_tokens.extend(raw.tokens[cursor:])
    return Utterance(index, speaker, tuple(out_tokens), tuple(out_mentions))


def _load_season(path: Path) -> list[tuple[tuple[int, int, int], list[_RawUtterance]]]:
    doc = _read_json(path)
    episodes = doc.get("episodes")
    if not isinstance(episodes, list):
        raise MalformedFile(f"{path}: no 'episodes' array")
    scenes = []
    for ep in episodes:
        for sc in ep.get("scenes", []):
            sid = str(sc.get("scene_id", ""))
            m = _SCENE_ID.match(sid)
            if not m:
                raise MalformedFile(f"{path}: bad scene_id {sid!r}")
            key = (int(m.group(1)), int(m.group(2)), int(m.group(3)))
            raws = []
            for u in sc.get("utterances", []):
                uid = str(u.get("utterance_id", f"{sid}_u?"))
                raw = _flatten_utterance(path, uid, u)
                _check_disjoint(path, f"utterance {uid}", raw.spans)
                raws.append(raw)
            scenes.append((key, raws))
    return scenes


class _RawPlot:
    __slots__ = ("key", "sentence", "tokens", "spans", "path")

    def __init__(self, key, sentence, tokens, spans, path):
        self.key = key
        self.sentence = sentence
        self.tokens = tokens
        self.spans = spans
        self.path = path


def _load_plots(path: Path) -> list[_RawPlot]:
    raws = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise MalformedFile(f"{path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedFile(f"{path}:{lineno}: {exc.msg}") from exc
        try:
            key = (int(rec["season"]), int(rec["episode"]), int(rec["scene"]))
            sentence = int(rec["sentence"])
            tokens = [str(t) for t in rec["tokens"]]
            spans = [
                (int(a), int(b), str(name)) for a, b, name in rec.get("mentions", [])
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedFile(f"{path}:{lineno}: bad plot record: {exc}") from exc
        for start, stop, _ in spans:
            if not (0 <= start < stop <= len(tokens)):
                raise BadSpan(
                    f"{path}:{lineno}: span [{start},{stop}) out of bounds"
                )
        _check_disjoint(path, f"line {lineno}", spans)
        raws.append(_RawPlot(key, sentence, tokens, spans, path))
    return raws


def _anonymize_plot(raw: _RawPlot, numbering: _EntityNumbering) -> PlotSentence:
    out_tokens: list[str] = []
    out_mentions: list[tuple[int, EntityRef]] = []
    cursor = 0
    for start, stop, name in sorted(raw.spans):
        out_tokens.extend(raw.tokens[cursor:start])
        ent = EntityRef(numbering.get(name), name)
        out_mentions.append((len(out_tokens), ent))
        out_tokens.append(ent.render())
        cursor = stop
    out_tokens.extend(raw.tokens[cursor:])
    season, episode, scene = raw.key
    plot_id = f"s{season:02d}_e{episode:02d}_c{scene:02d}_p{raw.sentence:02d}"
    return PlotSentence(
        plot_id, season, episode, scene, tuple(out_tokens), tuple(out_mentions)
    )


def import_corpus(transcript_root: Path | str, plot_root: Path | str | None) -> Corpus:
    """Parse source files, anonymize entities, and return a validated Corpus."""
    troot = Path(transcript_root)
    season_files = sorted(troot.glob("*.json")) if troot.is_dir() else []
    if not season_files:
        raise MalformedFile(f"{troot}: no season transcript files (*.json) found")

    raw_scenes: dict[tuple[int, int, int], list[_RawUtterance]] = {}
    for path in season_files:
        for key, raws in _load_season(path):
            if key in raw_scenes:
                raise MalformedFile(f"{path}: duplicate scene {key}")
            raw_scenes[key] = raws

    raw_plots: list[_RawPlot] = []
    if plot_root is not None:
        proot = Path(plot_root)
        for path in sorted(proot.glob("*.jsonl")) if proot.is_dir() else []:
            raw_plots.extend(_load_plots(path))
    plots_by_key: dict[tuple[int, int, int], list[_RawPlot]] = {}
    for rp in raw_plots:
        plots_by_key.setdefault(rp.key, []).append(rp)

    dialogues = []
    plots = []
    for key in sorted(raw_scenes):
        numbering = _EntityNumbering()
        utterances = tuple(
            _anonymize_utterance(raw, i, numbering)
            for i, raw in enumerate(raw_scenes[key], start=1)
        )
        for rp in sorted(plots_by_key.get(key, []), key=lambda r: r.sentence):
            plots.append(_anonymize_plot(rp, numbering))
        season, episode, scene = key
        dialogues.append(
            Dialogue(season, episode, scene, utterances, numbering.table())
        )

    for rp in raw_plots:
        if rp.key not in raw_scenes:
            season, episode, scene = rp.key
            raise DanglingPlot(
                f"{rp.path}: plot sentence {rp.sentence} references missing "
                f"dialogue s{season:02d}_e{episode:02d}_c{scene:02d}"
            )

    return Corpus(dialogues, plots)
