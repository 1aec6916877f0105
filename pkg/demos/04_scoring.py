"""Score a handful of predictions and walk through the counters.

python3 demos/04_scoring.py
"""

from plotcloze.evalkit import PredictionRecord, score
from plotcloze.synth import small_corpus
from plotcloze.taskgen import generate

corpus = small_corpus(seed=9)
gold = generate(corpus, "tv")[:6]

# Answer the first variable correctly everywhere, the second one never.
preds = []
for q in gold:
    assignments = {}
    for var in sorted(q.gold):
        assignments[var] = q.gold[var] if var in ("x", "x1") else "@ent99"
    preds.append(PredictionRecord(q.query_id, assignments))

report = score(gold, preds, "tv")

print("two-variable scoring is per variable, not per query:")
for key in ("C_t", "C_a", "C_g", "C_r"):
    print(f"  {key} = {report.counters[key]}")
print()
for name, value in report.metrics.items():
    print(f"  {name:<9} = {value:.4f}")
print()

# sv is all or nothing per query
sv_gold = generate(corpus, "sv")[:4]
sv_preds = [PredictionRecord(q.query_id, dict(q.gold)) for q in sv_gold[:3]]
sv_report = score(sv_gold, sv_preds, "sv")
print(f"sv: {len(sv_preds)} of {len(sv_gold)} answered correctly,")
print(f"    accuracy = {sv_report.metrics['accuracy']}")
print("    (a missing prediction counts as wrong, never as abstention)")
