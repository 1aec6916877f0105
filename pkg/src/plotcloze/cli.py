"""Command-line entry point wiring the pipeline stages together.

Subcommands: ingest, stats, generate, split, leakage, evaluate,
worksheet, baseline. Every run that writes artifacts writes exactly one
manifest.json into its output directory, capturing resolved config and
sha256 digests of inputs and outputs.

Exit codes: 0 success; 1 domain error, reported as one machine-parsable
stderr line ``error:{ErrorName}:{message}``; 2 usage error.

Configuration precedence: command-line flags, then ``--config FILE``
(flat ``key=value`` lines, ``#`` comments), then built-in defaults.
Randomized behavior always keys off the single ``--seed`` flag; pin
manifest timestamps with ``--stamp`` when byte-reproducible output
directories are wanted.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__, baselines, corpus as corpus_mod, datasplit, evalkit, taskgen
from .errors import PlotClozeError
from .ingest import import_corpus
from .manifest import RunManifest, write_manifest


class UsageError(Exception):
    pass


def _parse_config_file(path: str) -> dict[str, str]:
    values = {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"--config {path}: no such file")
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"--config {path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


class Settings:
    """Flag > config file > default resolution; records resolved values."""

    def __init__(self, args: argparse.Namespace):
        self._args = vars(args)
        self._file = (
            _parse_config_file(self._args["config"])
            if self._args.get("config")
            else {}
        )
        self.resolved: dict = {}

    def get(self, key: str, default=None, coerce=None, required: bool = False):
        attr = key.replace("-", "_")
        value = self._args.get(attr)
        if value is None and key in self._file:
            raw = self._file[key]
            if coerce is bool:
                value = raw.lower() in ("1", "true", "yes")
            else:
                value = (coerce or str)(raw)
        if value is None:
            value = default
        if required and value is None:
            raise UsageError(f"missing required option --{key}")
        self.resolved[key] = value
        return value


def _load_canonical(settings: Settings) -> tuple[corpus_mod.Corpus, list[Path]]:
    corpus_dir = Path(settings.get("corpus", required=True))
    c = corpus_mod.import_canonical(corpus_dir)
    paths = [corpus_dir / corpus_mod.DIALOGUES_FILE]
    plots = corpus_dir / corpus_mod.PLOTS_FILE
    if plots.exists():
        paths.append(plots)
    return c, paths


def _finish_run(
    settings: Settings,
    subcommand: str,
    out_dir: Path,
    inputs: list[Path],
    outputs: list[Path],
) -> None:
    stamp = settings.get("stamp")
    manifest = RunManifest(
        subcommand=subcommand,
        config={k: str(v) for k, v in settings.resolved.items() if v is not None},
        seed=settings.resolved.get("seed"),
    )
    for p in inputs:
        manifest.add_input(p)
    for p in outputs:
        manifest.add_output(p, out_dir)
    write_manifest(manifest, out_dir, stamp)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_ingest(settings: Settings) -> int:
    transcripts = Path(settings.get("transcripts", required=True))
    plots = settings.get("plots")
    out = Path(settings.get("out", required=True))

    c = import_corpus(transcripts, plots)
    written = corpus_mod.export_canonical(c, out)

    inputs = sorted(transcripts.glob("*.json"))
    if plots:
        inputs += sorted(Path(plots).glob("*.jsonl"))
    _finish_run(settings, "ingest", out, inputs, written)
    print(f"ingested {len(c.dialogues)} dialogues, {len(c.plots)} plot sentences")
    return 0


def cmd_stats(settings: Settings) -> int:
    c, input_paths = _load_canonical(settings)
    stats = corpus_mod.compute_stats(c)
    print(corpus_mod.format_stats_table(stats))

    out = settings.get("out")
    if out:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "stats.json"
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(corpus_mod.stats_to_dict(stats), f, indent=2)
            f.write("\n")
        _finish_run(settings, "stats", out_dir, input_paths, [path])
    return 0


def cmd_generate(settings: Settings) -> int:
    task = settings.get("task", default="all")
    if task not in ("sv", "mvs", "tv", "all"):
        raise UsageError(f"--task must be sv, mvs, tv, or all, not {task!r}")
    drop = bool(settings.get("drop-unanswerable", default=False))
    out = Path(settings.get("out", required=True))

    c, input_paths = _load_canonical(settings)
    tasks = list(taskgen.TASKS) if task == "all" else [task]
    written = []
    for t in tasks:
        queries = taskgen.generate(c, t)
        if drop:
            queries = taskgen.drop_unanswerable(queries)
        path = out / taskgen.query_file_name(t)
        written.append(taskgen.write_queries(queries, path))
        print(f"{t}: {len(queries)} queries -> {path}")
    _finish_run(settings, "generate", out, input_paths, written)
    return 0


_POLICY_NAMES = {
    "chrono": datasplit.CHRONOLOGICAL,
    "random": datasplit.RANDOM,
    "random-by-plot": datasplit.RANDOM_BY_PLOT,
}


def _make_policy(settings: Settings) -> datasplit.SplitPolicy:
    name = settings.get("policy", default="chrono")
    if name not in _POLICY_NAMES:
        raise UsageError(
            f"--policy must be one of {', '.join(_POLICY_NAMES)}, not {name!r}"
        )
    kind = _POLICY_NAMES[name]
    if kind == datasplit.CHRONOLOGICAL:
        return datasplit.SplitPolicy.chronological()
    seed = settings.get("seed", coerce=int)
    if seed is None:
        raise UsageError(f"--policy {name} requires --seed")
    return datasplit.SplitPolicy(kind, seed)


def cmd_split(settings: Settings) -> int:
    queries_path = Path(settings.get("queries", required=True))
    out = Path(settings.get("out", required=True))
    policy = _make_policy(settings)

    queries = taskgen.read_queries(queries_path)
    assignment = datasplit.split(queries, policy)
    path = datasplit.write_split(assignment, out / datasplit.split_file_name(policy))

    for task, counts in sorted(assignment.counts.items()):
        print(
            f"{task}: train {counts['train']} / dev {counts['dev']} / "
            f"test {counts['test']}"
        )
    _finish_run(settings, "split", out, [queries_path], [path])
    return 0


def cmd_leakage(settings: Settings) -> int:
    queries_path = Path(settings.get("queries", required=True))
    split_path = Path(settings.get("split", required=True))
    out = Path(settings.get("out", required=True))

    queries = taskgen.read_queries(queries_path)
    assignment = datasplit.read_split(split_path)
    report = datasplit.audit_leakage(queries, assignment)
    path = datasplit.write_leakage_report(report, out / "leakage_report.json")

    for pair in (report.dev, report.test):
        print(
            f"{pair.split}: {pair.n_leaked}/{pair.n_queries} leaked "
            f"({pair.fraction:.3f})"
        )
    _finish_run(settings, "leakage", out, [queries_path, split_path], [path])
    return 0


def _filter_by_split(
    queries: list[taskgen.Query], settings: Settings
) -> tuple[list[taskgen.Query], list[Path], str | None]:
    split_file = settings.get("split")
    subset = settings.get("subset")
    if split_file is None:
        return queries, [], subset
    if subset not in datasplit.SPLITS:
        raise UsageError("--split needs --subset train|dev|test")
    assignment = datasplit.read_split(split_file)
    kept = [
        q
        for q in queries
        if assignment.assignment.get(q.query_id) == subset
    ]
    return kept, [Path(split_file)], subset


def cmd_evaluate(settings: Settings) -> int:
    task = settings.get("task", required=True)
    gold_path = Path(settings.get("gold", required=True))
    pred_path = Path(settings.get("pred", required=True))

    gold = taskgen.read_queries(gold_path)
    gold, split_inputs, subset = _filter_by_split(gold, settings)
    preds = evalkit.read_predictions(pred_path)
    if split_inputs:
        kept_ids = {q.query_id for q in gold}
        preds = [p for p in preds if p.query_id in kept_ids]
    report = evalkit.score(gold, preds, task)
    report.split = subset

    metrics = "  ".join(f"{k}={v:.4f}" for k, v in sorted(report.metrics.items()))
    counters = "  ".join(f"{k}={v}" for k, v in sorted(report.counters.items()))
    print(f"task={task} n={report.n_queries}  {metrics}  [{counters}]")

    out = settings.get("out")
    if out:
        out_dir = Path(out)
        path = evalkit.write_report(report, out_dir / "report.json")
        _finish_run(
            settings, "evaluate", out_dir,
            [gold_path, pred_path] + split_inputs, [path],
        )
    return 0


def cmd_worksheet(settings: Settings) -> int:
    task = settings.get("task", required=True)
    gold_path = Path(settings.get("gold", required=True))
    pred_path = Path(settings.get("pred", required=True))
    n = settings.get("n", default=100, coerce=int)
    seed = settings.get("seed", coerce=int)
    if seed is None:
        raise UsageError("worksheet sampling requires --seed")
    out = Path(settings.get("out", required=True))

    c, corpus_inputs = _load_canonical(settings)
    gold = taskgen.read_queries(gold_path)
    preds = evalkit.read_predictions(pred_path)
    report = evalkit.score(gold, preds, task)
    rows = evalkit.export_worksheet(report, gold, preds, c, n, seed)
    path = evalkit.write_worksheet(rows, out / "worksheet.jsonl")

    print(f"sampled {len(rows)} wrong predictions for review")
    _finish_run(
        settings, "worksheet", out,
        [gold_path, pred_path] + corpus_inputs, [path],
    )
    return 0


def cmd_baseline(settings: Settings) -> int:
    action = settings.get("action", required=True)
    kind = settings.get("kind", default="loglinear")
    out = Path(settings.get("out", required=True))
    queries_path = Path(settings.get("queries", required=True))

    c, corpus_inputs = _load_canonical(settings)
    queries = taskgen.read_queries(queries_path)
    inputs = corpus_inputs + [queries_path]

    if action == "train":
        if kind != "loglinear":
            raise UsageError("only --kind loglinear is trainable")
        seed = settings.get("seed", coerce=int)
        if seed is None:
            raise UsageError("training requires --seed")
        split_file = settings.get("split")
        if split_file:
            assignment = datasplit.read_split(split_file)
            train = [q for q in queries
                     if assignment.assignment.get(q.query_id) == datasplit.TRAIN]
            dev = [q for q in queries
                   if assignment.assignment.get(q.query_id) == datasplit.DEV]
            inputs.append(Path(split_file))
        else:
            train, dev = queries, queries
        hp = baselines.Hyperparameters(
            learning_rate=settings.get("lr", default=0.1, coerce=float),
            epochs=settings.get("epochs", default=30, coerce=int),
            batch_size=settings.get("batch-size", default=32, coerce=int),
            l2=settings.get("l2", default=1e-4, coerce=float),
            seed=seed,
            tv_margin=settings.get("tv-margin", default=0.0, coerce=float),
        )
        task = settings.get("task", default=train[0].task if train else "sv")
        model = baselines.train_loglinear(c, train, dev, hp, task)
        path = baselines.save_model(model, out / "model.json")
        print(f"trained loglinear model -> {path}")
        _finish_run(settings, "baseline", out, inputs, [path])
        return 0

    if action == "predict":
        model = None
        if kind == "loglinear":
            model_path = Path(settings.get("model", required=True))
            model = baselines.load_model(model_path)
            inputs.append(model_path)
            seed = settings.get("seed", coerce=int, default=0)
        elif kind in baselines.HEURISTICS:
            seed = settings.get("seed", coerce=int)
            if seed is None and kind == "random":
                raise UsageError("--kind random requires --seed")
            seed = seed if seed is not None else 0
        else:
            raise UsageError(f"unknown --kind {kind!r}")
        preds = baselines.predict_all(c, queries, kind, seed, model)
        path = evalkit.write_predictions(preds, out / "predictions.jsonl")
        print(f"wrote {len(preds)} predictions -> {path}")
        _finish_run(settings, "baseline", out, inputs, [path])
        return 0

    raise UsageError(f"baseline action must be train or predict, not {action!r}")


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--out", help="output directory for artifacts + manifest")
    sub.add_argument("--seed", type=int, help="seed for all randomized behavior")
    sub.add_argument("--corpus", help="directory holding canonical corpus files")
    sub.add_argument("--config", help="flat key=value config file")
    sub.add_argument("--stamp", help="fixed ISO-8601 manifest timestamp")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotcloze",
        description="Build, split, audit, and score dialogue passage-completion benchmarks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    p = subs.add_parser("ingest", help="parse raw transcripts/plots into canonical files")
    p.add_argument("--transcripts", help="directory of season transcript *.json files")
    p.add_argument("--plots", help="directory of plot-summary *.jsonl files")
    _common(p)

    p = subs.add_parser("stats", help="corpus statistics table")
    _common(p)

    p = subs.add_parser("generate", help="generate cloze queries")
    p.add_argument("--task", choices=["sv", "mvs", "tv", "all"])
    p.add_argument("--drop-unanswerable", action="store_true", default=None)
    _common(p)

    p = subs.add_parser("split", help="assign queries to train/dev/test")
    p.add_argument("--queries", help="queries_{task}.jsonl file")
    p.add_argument("--policy", choices=["chrono", "random", "random-by-plot"])
    _common(p)

    p = subs.add_parser("leakage", help="audit a split for plot-level leakage")
    p.add_argument("--queries")
    p.add_argument("--split", help="split_{policy}.jsonl file")
    _common(p)

    p = subs.add_parser("evaluate", help="score a prediction file")
    p.add_argument("--task", choices=["sv", "mvs", "tv"])
    p.add_argument("--gold", help="gold queries file")
    p.add_argument("--pred", help="prediction jsonl file")
    p.add_argument("--split", help="optional split file to restrict gold")
    p.add_argument("--subset", choices=["train", "dev", "test"])
    _common(p)

    p = subs.add_parser("worksheet", help="sample wrong predictions for error review")
    p.add_argument("--task", choices=["sv", "mvs", "tv"])
    p.add_argument("--gold")
    p.add_argument("--pred")
    p.add_argument("--n", type=int)
    _common(p)

    p = subs.add_parser("baseline", help="train or run reference predictors")
    p.add_argument("action", choices=["train", "predict"])
    p.add_argument("--kind", choices=["random", "freq", "exclusion", "first", "loglinear"])
    p.add_argument("--task", choices=["sv", "mvs", "tv"])
    p.add_argument("--queries")
    p.add_argument("--split", help="optional split file (train on train, tune on dev)")
    p.add_argument("--model", help="model file for --kind loglinear predict")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--tv-margin", type=float)
    _common(p)

    return parser


_HANDLERS = {
    "ingest": cmd_ingest,
    "stats": cmd_stats,
    "generate": cmd_generate,
    "split": cmd_split,
    "leakage": cmd_leakage,
    "evaluate": cmd_evaluate,
    "worksheet": cmd_worksheet,
    "baseline": cmd_baseline,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        settings = Settings(args)
        return _HANDLERS[args.subcommand](settings)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except PlotClozeError as exc:
        print(f"error:{type(exc).__name__}:{exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
