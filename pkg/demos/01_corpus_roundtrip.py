"""Build a tiny corpus by hand, write it to disk, read it back, print stats.

Run from the repository root:

    python3 demos/01_corpus_roundtrip.py
"""

import tempfile
from pathlib import Path

from plotcloze.corpus import (
    Corpus,
    Dialogue,
    EntityRef,
    PlotSentence,
    Utterance,
    compute_stats,
    export_canonical,
    format_stats_table,
    import_canonical,
)


def ent(local_id, scene="s01e01c01"):
    return EntityRef(local_id, f"{scene}_char{local_id:02d}")


# A two-utterance scene. Mentions are (start, stop, entity) with stop
# exclusive, so (2, 3, ent(0)) marks the single token at position 2.
dialogue = Dialogue(
    season=1,
    episode=1,
    scene=1,
    utterances=(
        Utterance(1, ent(0), ("You", "owe", "me", "a", "mop", "."), ()),
        Utterance(2, ent(1), ("Fine", ",", "@ent00", ".", "Here", "."),
                  ((2, 3, ent(0)),)),
    ),
    entity_table={0: "Monica Geller", 1: "Ross Geller"},
)

plot = PlotSentence(
    plot_id="s01_e01_c01_p01",
    season=1, episode=1, scene=1,
    tokens=("@ent01", "buys", "@ent00", "a", "mop"),
    mentions=((0, ent(1)), (2, ent(0))),
)

corpus = Corpus([dialogue], [plot])

with tempfile.TemporaryDirectory() as tmp:
    out = Path(tmp) / "corpus"
    paths = export_canonical(corpus, out)
    print("wrote:")
    for p in paths:
        print(f"  {p.name}  ({p.stat().st_size} bytes)")
    print()
    print((out / "dialogues.jsonl").read_text(), end="")
    print()

    reloaded = import_canonical(out)
    assert reloaded == corpus, "roundtrip must be lossless"
    print("roundtrip ok: reloaded corpus equals the original")
    print()
    print(format_stats_table(compute_stats(reloaded)))
