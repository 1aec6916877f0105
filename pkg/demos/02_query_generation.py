"""Generate cloze queries from one plot sentence and show what each task
variant masks.

SV hides one mention occurrence at a time. MVS hides every occurrence of
one entity at once. TV hides ordered pairs of occurrences and asks for
both. Run with python3 demos/02_query_generation.py
"""

from plotcloze.synth import small_corpus
from plotcloze.taskgen import generate

corpus = small_corpus(seed=5)

# pick a plot with at least two distinct entities so TV gets interesting
plot = next(
    p for p in corpus.plots
    if len({e.local_id for _, e in p.mentions}) >= 2
)
print("plot:", " ".join(plot.tokens))
print("mentions at positions", [pos for pos, _ in plot.mentions])
print()

for task in ("sv", "mvs", "tv"):
    queries = [q for q in generate(corpus, task) if q.plot_id == plot.plot_id]
    m = len(plot.mentions)
    k = len({e.local_id for _, e in plot.mentions})
    print(f"{task}: {len(queries)} queries  (m={m}, k={k})")
    for q in queries[:4]:
        gold = ", ".join(f"{v}={e}" for v, e in sorted(q.gold.items()))
        print(f"  {' '.join(q.tokens)}")
        print(f"    -> {gold}")
    if len(queries) > 4:
        print(f"  ... {len(queries) - 4} more")
    # every query can be unmasked back into the plot it came from
    assert all(q.unmask() == plot.tokens for q in queries)
    print()

q = generate(corpus, "sv")[0]
print("candidates for the first query (speakers only, in local-id order):")
print(" ", q.candidates)
