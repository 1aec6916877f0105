"""Run every baseline on a synthetic benchmark and print a small table.

The heuristics need no training. The log-linear ranker trains with
mini-batch gradient descent on the chronological training partition and
keeps whichever epoch scored best on dev.

python3 demos/05_baselines.py  (takes a few seconds)
"""

from plotcloze.baselines import (
    FEATURE_NAMES,
    Hyperparameters,
    predict_all,
    train_loglinear,
)
from plotcloze.datasplit import SplitPolicy, split
from plotcloze.evalkit import score
from plotcloze.synth import benchmark_like_corpus
from plotcloze.taskgen import generate

corpus = benchmark_like_corpus(seed=3)
queries = generate(corpus, "sv")
assignment = split(queries, SplitPolicy.chronological())

parts = {name: [] for name in ("train", "dev", "test")}
for q in queries:
    parts[assignment.split_of(q.query_id)].append(q)
print({name: len(qs) for name, qs in parts.items()})

hp = Hyperparameters(learning_rate=0.2, epochs=15, batch_size=32, seed=0)
model = train_loglinear(corpus, parts["train"], parts["dev"], hp)
dev_preds = predict_all(corpus, parts["dev"], "loglinear", model=model)
dev_acc = score(parts["dev"], dev_preds, "sv").metrics["accuracy"]
print(f"trained log-linear ranker, dev accuracy {dev_acc:.4f}")
print()

print(f"{'baseline':<12} {'test accuracy':>13}")
for kind in ("random", "first", "freq", "exclusion", "loglinear"):
    preds = predict_all(corpus, parts["test"], kind, seed=0, model=model)
    report = score(parts["test"], preds, "sv")
    print(f"{kind:<12} {report.metrics['accuracy']:>13.4f}")

print()
print("feature weights:")
for name, w in zip(FEATURE_NAMES, model.weights):
    print(f"  {name:<18} {w:+.4f}")
