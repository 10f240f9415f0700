import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from querymamba.metrics import (
    EditDistanceReport,
    edit_distance,
    evaluate_dataset,
    levenshtein,
    levenshtein_batch,
    min_over_k,
    read_predictions,
    write_predictions,
)

from oracles import naive_levenshtein

tokens = st.lists(st.integers(0, 3), max_size=7)
pair_seq = lambda Z: st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=Z, max_size=Z)


def test_examples():
    truth = [(0, 1), (2, 3)]
    assert edit_distance(truth, truth) == 0.0
    assert edit_distance([(0, 1), (5, 5)], truth) == 0.5
    disjoint_a = [(i, i) for i in range(20)]
    disjoint_b = [(i + 20, i + 20) for i in range(20)]
    assert edit_distance(disjoint_a, disjoint_b) == 1.0


def test_views_tokenize_differently():
    truth = [(0, 1), (2, 3)]
    pred = [(0, 9), (2, 3)]
    assert edit_distance(pred, truth, "verb") == 0.0
    assert edit_distance(pred, truth, "noun") == 0.5
    assert edit_distance(pred, truth, "action") == 0.5
    with pytest.raises(ValueError):
        edit_distance(pred, truth, "object")


def test_length_mismatch():
    with pytest.raises(ValueError):
        edit_distance([(0, 0)], [(0, 0), (1, 1)])


def test_shift_costs_two_edits():
    a = [(1, 1), (2, 2), (3, 3), (4, 4)]
    b = [(2, 2), (3, 3), (4, 4), (5, 5)]
    assert edit_distance(a, b) == 0.5


@given(tokens, tokens)
def test_matches_recursive_oracle(a, b):
    assert levenshtein(a, b) == naive_levenshtein(tuple(a), tuple(b))


@given(tokens, tokens, tokens)
def test_metric_axioms(a, b, c):
    assert (levenshtein(a, b) == 0) == (a == b)
    assert levenshtein(a, b) == levenshtein(b, a)
    assert levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c)


@given(st.integers(1, 6).flatmap(lambda Z: st.tuples(pair_seq(Z), pair_seq(Z))))
def test_action_view_dominates(pair):
    pred, truth = pair
    action = edit_distance(pred, truth, "action")
    assert 0.0 <= action <= 1.0
    assert action >= max(edit_distance(pred, truth, "verb"), edit_distance(pred, truth, "noun"))


def test_batch_matches_scalar(rng):
    a = rng.integers(0, 4, size=(200, 9))
    b = rng.integers(0, 4, size=(200, 9))
    assert levenshtein_batch(a, b).tolist() == [levenshtein(x, y) for x, y in zip(a.tolist(), b.tolist())]


def test_min_over_k_examples(rng):
    truth = [(0, 0), (1, 1), (2, 2)]
    cands = [[(5, 5)] * 3, truth, [(0, 0), (1, 1), (3, 3)]]
    assert min_over_k(cands, truth) == (0.0, 1)
    assert min_over_k(cands[:1], truth)[0] == edit_distance(cands[0], truth)
    with pytest.raises(ValueError):
        min_over_k([], truth)
    for _ in range(50):
        ks = [[tuple(p) for p in rng.integers(0, 3, size=(3, 2))] for _ in range(5)]
        best, k = min_over_k(ks, truth[:2] + [(1, 2)], "action")
        brute = [edit_distance(c, truth[:2] + [(1, 2)]) for c in ks]
        assert best == min(brute) and brute[k] == best


@given(st.lists(pair_seq(4), min_size=1, max_size=6), pair_seq(4), pair_seq(4))
def test_min_over_k_monotone(cands, extra, truth):
    before, _ = min_over_k(cands, truth)
    after, _ = min_over_k(cands + [extra], truth)
    assert after <= before


def test_evaluate_dataset_mean_and_errors():
    truths = {"a": [(0, 0), (1, 1)], "b": [(2, 2), (3, 3)]}
    preds = {"a": [[(0, 0), (1, 1)]], "b": [[(9, 2), (3, 3)], [(9, 9), (9, 9)]]}
    r = evaluate_dataset(preds, truths)
    assert (r.verb_ed, r.noun_ed, r.action_ed, r.num_clips) == (0.25, 0.0, 0.25, 2)
    assert r.best_k["b"]["action"] == 0
    with pytest.raises(KeyError, match="b"):
        evaluate_dataset({"a": preds["a"]}, truths)


def test_evaluate_all_perfect():
    truths = {"x": [(1, 2)] * 3}
    r = evaluate_dataset({"x": [truths["x"]]}, truths)
    assert (r.verb_ed, r.noun_ed, r.action_ed) == (0.0, 0.0, 0.0)


def test_report_json(tmp_path):
    r = EditDistanceReport(0.5, 0.25, 0.75, 3)
    r.write(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text()) == {
        "verb_ed": 0.5, "noun_ed": 0.25, "action_ed": 0.75, "num_clips": 3}


def test_predictions_round_trip(tmp_path):
    preds = {"b": np.array([[[1, 2], [3, 4]]]), "a": np.array([[[0, 0], [0, 1]], [[5, 5], [6, 6]]])}
    write_predictions(tmp_path / "p.jsonl", preds)
    lines = (tmp_path / "p.jsonl").read_text().splitlines()
    assert [json.loads(l)["clip_id"] for l in lines] == ["a", "b"]
    back = read_predictions(tmp_path / "p.jsonl")
    assert back["a"] == [[(0, 0), (0, 1)], [(5, 5), (6, 6)]]
