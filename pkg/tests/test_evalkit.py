"""Scoring, counters, and the error worksheet.

`_brute_force` below is an independent recount written directly from
the metric definitions (C_r right answers, C_t total queries, C_a
answered slots, C_g gold slots; accuracy C_r/C_t for one-answer tasks,
micro precision/recall/F1 for the two-variable task). The library must
agree with it to the last bit on randomized fixtures.
"""

import math

from hypothesis import given, settings, strategies as st
import pytest

from plotcloze.evalkit import (
    ERROR_CATEGORIES,
    EvalReport,
    PredictionRecord,
    export_worksheet,
    read_predictions,
    render_dialogue_lines,
    report_to_dict,
    score,
    write_predictions,
    write_report,
    write_worksheet,
)
from plotcloze.errors import (
    DuplicatePrediction,
    IllegalVariable,
    MalformedFile,
    UnknownQueryId,
)
from plotcloze.taskgen import Query, generate

from fixturelib import make_credit_card_corpus


def _q(qid, gold, task="sv", plot="p1"):
    masked = tuple((i, var) for i, var in enumerate(sorted(gold)))
    return Query(
        query_id=qid, task=task, season=1, episode=1, scene=1, plot_id=plot,
        tokens=tuple(sorted(gold)) + ("waves",), masked=masked, gold=gold,
        candidates=("@ent00", "@ent01", "@ent02"),
    )


def _p(qid, assignments):
    return PredictionRecord(qid, assignments)


# ---------------------------------------------------------------------------
# Independent recount
# ---------------------------------------------------------------------------

def _brute_force(gold, preds, task):
    by_id = {}
    for p in preds:
        assert p.query_id not in by_id
        by_id[p.query_id] = p.assignments
    c_t = len(gold)
    c_a = c_g = c_r = 0
    exact = 0
    for q in gold:
        pred = by_id.get(q.query_id, {})
        c_a += len(pred)
        if task == "tv":
            c_g += len(q.gold)
            for var, ent in pred.items():
                if q.gold.get(var) == ent:
                    c_r += 1
        else:
            c_g += 1
            if pred == q.gold:
                c_r += 1
        if pred == q.gold:
            exact += 1
    if task == "tv":
        p = c_r / c_a if c_a else 0.0
        r = c_r / c_g if c_g else 0.0
        f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
        return {"precision": p, "recall": r, "f1": f1}
    return {"accuracy": exact / c_t if c_t else 0.0}


# ---------------------------------------------------------------------------
# Hand-worked cases
# ---------------------------------------------------------------------------

def test_sv_three_of_four_right():
    gold = [_q(f"q{i}", {"x": "@ent00"}) for i in range(4)]
    preds = [
        _p("q0", {"x": "@ent00"}),
        _p("q1", {"x": "@ent00"}),
        _p("q2", {"x": "@ent00"}),
        _p("q3", {"x": "@ent01"}),
    ]
    report = score(gold, preds, "sv")
    assert report.metrics == {"accuracy": 0.75}
    assert report.counters == {"C_r": 3, "C_t": 4, "C_a": 4, "C_g": 4}
    assert report.verdicts == {"q0": True, "q1": True, "q2": True, "q3": False}


def test_sv_missing_prediction_counts_as_wrong():
    gold = [_q("q0", {"x": "@ent00"}), _q("q1", {"x": "@ent00"})]
    report = score(gold, [_p("q0", {"x": "@ent00"})], "sv")
    assert report.metrics["accuracy"] == 0.5
    assert report.counters["C_a"] == 1


def test_sv_no_predictions_at_all():
    gold = [_q("q0", {"x": "@ent00"})]
    report = score(gold, [], "sv")
    assert report.metrics["accuracy"] == 0.0


def test_tv_swapped_variables_score_zero():
    gold = [_q("q0", {"x1": "@ent00", "x2": "@ent01"}, task="tv")]
    preds = [_p("q0", {"x1": "@ent01", "x2": "@ent00"})]
    report = score(gold, preds, "tv")
    assert report.metrics == {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    assert report.counters == {"C_r": 0, "C_t": 1, "C_a": 2, "C_g": 2}


def test_tv_two_answers_for_one_gold_slot():
    """One gold variable, two predicted: precision 0.5, recall 1.0."""
    gold = [_q("q0", {"x1": "@ent00"}, task="tv")]
    preds = [_p("q0", {"x1": "@ent00", "x2": "@ent01"})]
    report = score(gold, preds, "tv")
    assert report.metrics["precision"] == 0.5
    assert report.metrics["recall"] == 1.0
    assert math.isclose(report.metrics["f1"], 2 / 3)


def test_tv_perfect():
    gold = [_q("q0", {"x1": "@ent00", "x2": "@ent01"}, task="tv")]
    preds = [_p("q0", {"x1": "@ent00", "x2": "@ent01"})]
    report = score(gold, preds, "tv")
    assert report.metrics == {"precision": 1.0, "recall": 1.0, "f1": 1.0}


def test_tv_empty_predictions_conventions():
    gold = [_q("q0", {"x1": "@ent00", "x2": "@ent01"}, task="tv")]
    report = score(gold, [], "tv")
    assert report.metrics == {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    assert report.counters["C_a"] == 0


def test_mvs_scored_like_sv():
    gold = [_q("q0", {"x": "@ent02"}, task="mvs")]
    report = score(gold, [_p("q0", {"x": "@ent02"})], "mvs")
    assert report.metrics == {"accuracy": 1.0}
    assert report.task == "mvs"


# ---------------------------------------------------------------------------
# Prediction hygiene
# ---------------------------------------------------------------------------

def test_unknown_query_id_rejected():
    gold = [_q("q0", {"x": "@ent00"})]
    with pytest.raises(UnknownQueryId):
        score(gold, [_p("mystery", {"x": "@ent00"})], "sv")


def test_duplicate_prediction_rejected():
    gold = [_q("q0", {"x": "@ent00"})]
    preds = [_p("q0", {"x": "@ent00"}), _p("q0", {"x": "@ent01"})]
    with pytest.raises(DuplicatePrediction):
        score(gold, preds, "sv")


def test_illegal_variable_for_task():
    gold = [_q("q0", {"x": "@ent00"})]
    with pytest.raises(IllegalVariable):
        score(gold, [_p("q0", {"x1": "@ent00"})], "sv")
    gold_tv = [_q("q0", {"x1": "@ent00"}, task="tv")]
    with pytest.raises(IllegalVariable):
        score(gold_tv, [_p("q0", {"x": "@ent00"})], "tv")


# ---------------------------------------------------------------------------
# Randomized equivalence with the recount
# ---------------------------------------------------------------------------

ENTS = ["@ent00", "@ent01", "@ent02", "@ent03"]


@st.composite
def scored_fixture(draw, task):
    n = draw(st.integers(1, 12))
    gold = []
    preds = []
    for i in range(n):
        if task == "tv":
            n_vars = draw(st.integers(1, 2))
            variables = ["x1", "x2"] if n_vars == 2 else [draw(st.sampled_from(["x1", "x2"]))]
            gmap = {v: draw(st.sampled_from(ENTS)) for v in variables}
        else:
            gmap = {"x": draw(st.sampled_from(ENTS))}
        gold.append(_q(f"q{i:03d}", gmap, task=task))
        if draw(st.booleans()):
            legal = ["x1", "x2"] if task == "tv" else ["x"]
            pvars = draw(st.lists(st.sampled_from(legal), unique=True, min_size=1))
            preds.append(_p(f"q{i:03d}",
                            {v: draw(st.sampled_from(ENTS)) for v in pvars}))
    return gold, preds


@given(scored_fixture(task="sv"))
@settings(max_examples=120)
def test_sv_matches_recount(fixture):
    gold, preds = fixture
    report = score(gold, preds, "sv")
    expected = _brute_force(gold, preds, "sv")
    assert math.isclose(report.metrics["accuracy"], expected["accuracy"],
                        abs_tol=1e-12)


@given(scored_fixture(task="tv"))
@settings(max_examples=120)
def test_tv_matches_recount(fixture):
    gold, preds = fixture
    report = score(gold, preds, "tv")
    expected = _brute_force(gold, preds, "tv")
    for key in ("precision", "recall", "f1"):
        assert math.isclose(report.metrics[key], expected[key], abs_tol=1e-12)


@given(scored_fixture(task="tv"))
@settings(max_examples=120)
def test_counter_identities(fixture):
    gold, preds = fixture
    c = score(gold, preds, "tv").counters
    assert 0 <= c["C_r"] <= min(c["C_a"], c["C_g"])
    assert c["C_g"] >= c["C_t"]              # every tv query has >= 1 gold slot
    assert c["C_a"] <= 2 * c["C_t"]


# ---------------------------------------------------------------------------
# Worksheet
# ---------------------------------------------------------------------------

def _scored_credit_card():
    corpus = make_credit_card_corpus()
    gold = generate(corpus, "sv")
    # answer @ent01 everywhere: wrong for all five queries
    preds = [_p(q.query_id, {"x": "@ent01"}) for q in gold]
    report = score(gold, preds, "sv")
    return corpus, gold, preds, report


def test_worksheet_rows_shape():
    corpus, gold, preds, report = _scored_credit_card()
    rows = export_worksheet(report, gold, preds, corpus, n=3, seed=1)
    assert len(rows) == 3
    for row in rows:
        assert row["category"] == ""
        assert row["predicted"] == {"x": "@ent01"}
        assert row["gold"]["x"] in ("@ent00", "@ent04")
        assert any("\t" in line for line in row["dialogue"])
        assert row["candidates"] == ["@ent00", "@ent01", "@ent04",
                                     "@ent05", "@ent06"]


def test_worksheet_seeded_and_capped():
    corpus, gold, preds, report = _scored_credit_card()
    a = export_worksheet(report, gold, preds, corpus, n=2, seed=9)
    b = export_worksheet(report, gold, preds, corpus, n=2, seed=9)
    c = export_worksheet(report, gold, preds, corpus, n=99, seed=9)
    assert a == b
    assert len(a) == 2
    assert len(c) == 5


def test_worksheet_only_wrong_queries():
    corpus, gold, _, _ = _scored_credit_card()
    # all right: nothing to review
    right = [_p(q.query_id, dict(q.gold)) for q in gold]
    report = score(gold, right, "sv")
    rows = export_worksheet(report, gold, right, corpus, n=10, seed=0)
    assert rows == []


def test_error_categories_frozen():
    assert "hidden_meaning" in ERROR_CATEGORIES
    assert "coreference_resolution" in ERROR_CATEGORIES
    assert len(ERROR_CATEGORIES) == 7


def test_render_dialogue_narrator_dash():
    corpus = make_credit_card_corpus()
    lines = render_dialogue_lines(corpus, (1, 21, 1))
    assert lines[0].startswith("@ent04\t")
    assert len(lines) == 7


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def test_prediction_file_roundtrip(tmp_path):
    preds = [_p("q0", {"x": "@ent00"}), _p("q1", {"x": "@ent02"})]
    path = write_predictions(preds, tmp_path / "p.jsonl")
    assert read_predictions(path) == preds


def test_prediction_file_rejects_duplicates(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text(
        '{"query_id":"q0","assignments":{"x":"@ent00"}}\n'
        '{"query_id":"q0","assignments":{"x":"@ent01"}}\n'
    )
    with pytest.raises(DuplicatePrediction):
        read_predictions(path)


def test_prediction_file_rejects_garbage(tmp_path):
    path = tmp_path / "p.jsonl"
    path.write_text("not json at all\n")
    with pytest.raises(MalformedFile):
        read_predictions(path)


def test_report_file(tmp_path):
    gold = [_q("q0", {"x": "@ent00"})]
    report = score(gold, [_p("q0", {"x": "@ent00"})], "sv")
    path = write_report(report, tmp_path / "report.json")
    text = path.read_text()
    assert '"accuracy": 1.0' in text
    d = report_to_dict(report)
    assert d["task"] == "sv"
    assert d["counters"]["C_r"] == 1


def test_worksheet_file(tmp_path):
    corpus, gold, preds, report = _scored_credit_card()
    rows = export_worksheet(report, gold, preds, corpus, n=2, seed=3)
    path = write_worksheet(rows, tmp_path / "w.jsonl")
    assert len(path.read_text().splitlines()) == 2
