"""Train/dev/test assignment policies and plot-level leakage auditing.

Chronological policy: per season, episodes 1-18 train, 19-21 dev, 22 and
later test. Pure function of (season, episode); seed ignored.

Random policy: Fisher-Yates shuffle (see rng module) of the sorted query
ids, then the first floor(0.8 n) ids go to train, the next floor(0.1 n)
to dev, the remainder to test. Splitting at query level reproduces the
failure mode this toolkit exists to audit: sibling queries generated from
the same plot sentence land on both sides of the split.

Random-by-plot policy: the leak-free randomized control. Sorted distinct
plot ids are shuffled; walking that order, each plot's queries go to train
until train holds at least floor(0.8 n) queries, then to dev until
train+dev holds floor(0.9 n), then to test.

A dev or test query is leaked iff its plot_id also sources at least one
training query.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    EmptyQuerySet,
    IoFailure,
    MalformedFile,
    MissingProvenance,
    MissingSeed,
)
from .rng import SplitMix64
from .taskgen import Query

TRAIN, DEV, TEST = "train", "dev", "test"
SPLITS = (TRAIN, DEV, TEST)

CHRONOLOGICAL = "chronological"
RANDOM = "random"
RANDOM_BY_PLOT = "random-by-plot"

TRAIN_LAST_EPISODE = 18
DEV_LAST_EPISODE = 21


@dataclass(frozen=True)
class SplitPolicy:
    kind: str
    seed: int | None = None

    @staticmethod
    def chronological() -> "SplitPolicy":
        return SplitPolicy(CHRONOLOGICAL)

    @staticmethod
    def random(seed: int) -> "SplitPolicy":
        return SplitPolicy(RANDOM, seed)

    @staticmethod
    def random_by_plot(seed: int) -> "SplitPolicy":
        return SplitPolicy(RANDOM_BY_PLOT, seed)


@dataclass
class SplitAssignment:
    assignment: dict[str, str]  # query_id -> train|dev|test
    policy: SplitPolicy
    counts: dict[str, dict[str, int]] = field(default_factory=dict)  # task -> split -> n

    def split_of(self, query_id: str) -> str:
        return self.assignment[query_id]


def episode_split(episode: int) -> str:
    if episode <= TRAIN_LAST_EPISODE:
        return TRAIN
    if episode <= DEV_LAST_EPISODE:
        return DEV
    return TEST


def _count(queries: list[Query], assignment: dict[str, str]) -> dict[str, dict[str, int]]:
    counts: dict[str, dict[str, int]] = {}
    for q in queries:
        per_task = counts.setdefault(q.task, {s: 0 for s in SPLITS})
        per_task[assignment[q.query_id]] += 1
    return counts


def split(queries: list[Query], policy: SplitPolicy) -> SplitAssignment:
    if not queries:
        raise EmptyQuerySet("cannot split an empty query list")

    if policy.kind == CHRONOLOGICAL:
        assignment = {q.query_id: episode_split(q.episode) for q in queries}
    elif policy.kind == RANDOM:
        if policy.seed is None:
            raise MissingSeed("random policy requires a seed")
        ids = sorted(q.query_id for q in queries)
        SplitMix64(policy.seed).shuffle(ids)
        n = len(ids)
        n_train, n_dev = (8 * n) // 10, n // 10
        assignment = {}
        for rank, qid in enumerate(ids):
            if rank < n_train:
                assignment[qid] = TRAIN
            elif rank < n_train + n_dev:
                assignment[qid] = DEV
            else:
                assignment[qid] = TEST
    elif policy.kind == RANDOM_BY_PLOT:
        if policy.seed is None:
            raise MissingSeed("random-by-plot policy requires a seed")
        per_plot: dict[str, list[str]] = {}
        for q in queries:
            per_plot.setdefault(q.plot_id, []).append(q.query_id)
        plot_ids = sorted(per_plot)
        SplitMix64(policy.seed).shuffle(plot_ids)
        n = len(queries)
        train_target, dev_target = (8 * n) // 10, (9 * n) // 10
        assignment = {}
        placed = 0
        for pid in plot_ids:
            dest = TRAIN if placed < train_target else DEV if placed < dev_target else TEST
            for qid in per_plot[pid]:
                assignment[qid] = dest
            placed += len(per_plot[pid])
    else:
        raise ValueError(f"unknown split policy {policy.kind!r}")

    return SplitAssignment(assignment, policy, _count(queries, assignment))


# ---------------------------------------------------------------------------
# Leakage audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LeakagePair:
    split: str
    n_queries: int
    n_leaked: int
    offending_plot_ids: tuple[str, ...]

    @property
    def fraction(self) -> float:
        return self.n_leaked / self.n_queries if self.n_queries else 0.0


@dataclass(frozen=True)
class LeakageReport:
    policy: SplitPolicy
    dev: LeakagePair
    test: LeakagePair


def audit_leakage(queries: list[Query], assignment: SplitAssignment) -> LeakageReport:
    for q in queries:
        if not q.plot_id:
            raise MissingProvenance(f"query {q.query_id} has no plot_id")

    train_plots = {
        q.plot_id for q in queries if assignment.split_of(q.query_id) == TRAIN
    }

    def pair(split_name: str) -> LeakagePair:
        members = [q for q in queries if assignment.split_of(q.query_id) == split_name]
        leaked = [q for q in members if q.plot_id in train_plots]
        return LeakagePair(
            split_name,
            len(members),
            len(leaked),
            tuple(sorted({q.plot_id for q in leaked})),
        )

    return LeakageReport(assignment.policy, pair(DEV), pair(TEST))


# ---------------------------------------------------------------------------
# Files: split_{policy}.jsonl and leakage_report.json
# ---------------------------------------------------------------------------

def split_file_name(policy: SplitPolicy) -> str:
    kind = {"chronological": "chrono", "random": "random",
            "random-by-plot": "random_by_plot"}[policy.kind]
    return f"split_{kind}.jsonl"


def write_split(assignment: SplitAssignment, path: Path | str) -> Path:
    """Header line carries the policy; one record per query after it."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            header = {
                "policy": {
                    "kind": assignment.policy.kind,
                    "seed": assignment.policy.seed,
                }
            }
            f.write(json.dumps(header, separators=(",", ":")) + "\n")
            for qid in sorted(assignment.assignment):
                rec = {"query_id": qid, "split": assignment.assignment[qid]}
                f.write(json.dumps(rec, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_split(path: Path | str) -> SplitAssignment:
    path = Path(path)
    assignment: dict[str, str] = {}
    policy = None
    try:
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
                if policy is None:
                    if "policy" not in rec:
                        raise MalformedFile(f"{path}:1: missing policy header")
                    policy = SplitPolicy(rec["policy"]["kind"], rec["policy"]["seed"])
                    continue
                try:
                    qid, dest = rec["query_id"], rec["split"]
                except (KeyError, TypeError) as exc:
                    raise MalformedFile(f"{path}:{lineno}: {exc}") from exc
                if dest not in SPLITS:
                    raise MalformedFile(f"{path}:{lineno}: bad split {dest!r}")
                if qid in assignment:
                    raise MalformedFile(f"{path}:{lineno}: duplicate query_id {qid}")
                assignment[qid] = dest
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if policy is None:
        raise MalformedFile(f"{path}: empty split file")
    return SplitAssignment(assignment, policy)


def leakage_report_to_dict(report: LeakageReport) -> dict:
    def pair(p: LeakagePair) -> dict:
        return {
            "n_queries": p.n_queries,
            "n_leaked": p.n_leaked,
            "fraction": p.fraction,
            "offending_plot_ids": list(p.offending_plot_ids),
        }

    return {
        "policy": report.policy.kind,
        "seed": report.policy.seed,
        "dev": pair(report.dev),
        "test": pair(report.test),
    }


def write_leakage_report(report: LeakageReport, path: Path | str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            json.dump(leakage_report_to_dict(report), f, indent=2, sort_keys=False)
            f.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path
