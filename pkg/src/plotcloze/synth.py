"""Seeded synthetic corpora for demos, property tests, and dry runs.

Generated corpora are structurally valid (anonymized tokens, entity
tables, aligned plots) but textually nonsense. `benchmark_like_corpus`
is sized like the published full corpus in the aggregates that matter to
split auditing: about 1.7k dialogues, about 4.6k plot sentences, and a
per-plot mention-occurrence distribution averaging about 3. Nothing else
about it is calibrated.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Corpus, Dialogue, EntityRef, PlotSentence, Utterance
from .rng import SplitMix64

_VOCAB = (
    "the a an so and then but why really just quite over under with without "
    "door room coffee couch phone ticket letter boat train plan party game "
    "dinner lunch gift ring box key song movie show week night morning "
    "says asks tells buys loses finds takes gives leaves meets calls helps "
    "happy angry late early sorry sure fine weird great terrible small big "
    "new old next last other own . , ? !"
).split()

# Mention occurrences per plot sentence, m = 0..8. Mean 2.89, matching the
# published per-plot mention average of about 3.
PLOT_MENTION_WEIGHTS = (3, 22, 24, 20, 13, 8, 5, 3, 2)


def _weighted(rng: SplitMix64, weights: tuple[int, ...]) -> int:
    total = sum(weights)
    pick = rng.randbelow(total)
    acc = 0
    for value, w in enumerate(weights):
        acc += w
        if pick < acc:
            return value
    return len(weights) - 1


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_seasons: int = 1
    episodes_per_season: int = 24
    scenes_per_episode: int = 2
    min_utterances: int = 8
    max_utterances: int = 22
    min_entities: int = 2
    max_entities: int = 9
    min_plots_per_scene: int = 1
    max_plots_per_scene: int = 4
    narrator_rate_pct: int = 10
    unanswerable_rate_pct: int = 0
    plot_mention_weights: tuple[int, ...] = PLOT_MENTION_WEIGHTS


def _make_utterance(
    rng: SplitMix64, index: int, speaker: EntityRef | None, pool: list[EntityRef]
) -> Utterance:
    n = 5 + rng.randbelow(18)
    tokens = [rng.choice(list(_VOCAB)) for _ in range(n)]
    k = min(rng.randbelow(3), n)
    positions = sorted(rng.sample(list(range(n)), k))
    mentions = []
    for pos in positions:
        ent = rng.choice(pool)
        tokens[pos] = ent.render()
        mentions.append((pos, pos + 1, ent))
    return Utterance(index, speaker, tuple(tokens), tuple(mentions))


def _make_dialogue(rng: SplitMix64, season: int, episode: int, scene: int,
                   cfg: SynthConfig) -> Dialogue:
    n_entities = cfg.min_entities + rng.randbelow(
        cfg.max_entities - cfg.min_entities + 1
    )
    pool = [
        EntityRef(lid, f"s{season:02d}e{episode:02d}c{scene:02d}_char{lid:02d}")
        for lid in range(n_entities)
    ]
    n_utt = cfg.min_utterances + rng.randbelow(
        cfg.max_utterances - cfg.min_utterances + 1
    )
    utterances = []
    for i in range(1, n_utt + 1):
        if rng.randbelow(100) < cfg.narrator_rate_pct:
            speaker = None
        else:
            # cycle speakers so every pool entity shows up in long dialogues
            speaker = pool[(i - 1) % n_entities] if i <= n_entities else rng.choice(pool)
        utterances.append(_make_utterance(rng, i, speaker, pool))

    used = set()
    for utt in utterances:
        if utt.speaker is not None:
            used.add(utt.speaker.local_id)
        for _, _, ent in utt.mentions:
            used.add(ent.local_id)
    table = {e.local_id: e.global_id for e in pool if e.local_id in used}
    return Dialogue(season, episode, scene, tuple(utterances), table)


def _make_plot(rng: SplitMix64, dlg: Dialogue, table: dict[int, str | None],
               sentence: int, cfg: SynthConfig) -> PlotSentence:
    """table is the dialogue's entity table; offstage entities extend it."""
    m = _weighted(rng, cfg.plot_mention_weights)
    n = max(m + 5, 10 + rng.randbelow(14))
    tokens = [rng.choice(list(_VOCAB)) for _ in range(n)]
    present = dlg.present_entities()
    positions = sorted(rng.sample(list(range(n)), m))
    mentions = []
    for pos in positions:
        if present and rng.randbelow(100) >= cfg.unanswerable_rate_pct:
            lid = rng.choice(present)
        else:
            lid = max(table) + 1 if table else 0
            table[lid] = f"{dlg.key_str}_offstage{lid:02d}"
        ent = EntityRef(lid, table[lid])
        tokens[pos] = ent.render()
        mentions.append((pos, ent))
    plot_id = f"{dlg.key_str}_p{sentence:02d}"
    return PlotSentence(
        plot_id, dlg.season, dlg.episode, dlg.scene, tuple(tokens), tuple(mentions)
    )


def make_corpus(cfg: SynthConfig) -> Corpus:
    rng = SplitMix64(cfg.seed)
    dialogues = []
    plots = []
    for season in range(1, cfg.n_seasons + 1):
        for episode in range(1, cfg.episodes_per_season + 1):
            for scene in range(1, cfg.scenes_per_episode + 1):
                dlg = _make_dialogue(rng, season, episode, scene, cfg)
                table = dict(dlg.entity_table)
                n_plots = cfg.min_plots_per_scene + rng.randbelow(
                    cfg.max_plots_per_scene - cfg.min_plots_per_scene + 1
                )
                for sentence in range(1, n_plots + 1):
                    plots.append(_make_plot(rng, dlg, table, sentence, cfg))
                if table != dlg.entity_table:
                    dlg = Dialogue(
                        dlg.season, dlg.episode, dlg.scene, dlg.utterances, table
                    )
                dialogues.append(dlg)
    return Corpus(dialogues, plots)


def benchmark_like_corpus(seed: int = 0) -> Corpus:
    """Sized like the published corpus where it matters to split audits."""
    return make_corpus(
        SynthConfig(
            seed=seed,
            n_seasons=10,
            episodes_per_season=24,
            scenes_per_episode=7,
            min_plots_per_scene=1,
            max_plots_per_scene=4,
        )
    )


def small_corpus(seed: int = 0, unanswerable_rate_pct: int = 0) -> Corpus:
    """A quick corpus spanning the chronological split boundaries."""
    return make_corpus(
        SynthConfig(seed=seed, unanswerable_rate_pct=unanswerable_rate_pct)
    )
