"""Normalized edit distance between action sequences, best of K candidates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

VIEWS = ("verb", "noun", "action")

ActionSequence = Sequence[tuple[int, int]]


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Unit-cost insert/delete/substitute distance (two-row DP)."""
    a, b = list(a), list(b)
    # a shared prefix or suffix never changes the distance
    while a and b and a[-1] == b[-1]:
        a.pop()
        b.pop()
    start = 0
    while start < len(a) and start < len(b) and a[start] == b[start]:
        start += 1
    a, b = a[start:], b[start:]
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def _tokens(seq: ActionSequence, view: str) -> list:
    if view == "action":
        return [(int(v), int(n)) for v, n in seq]
    if view == "verb":
        return [int(v) for v, _ in seq]
    if view == "noun":
        return [int(n) for _, n in seq]
    raise ValueError(f"unknown view {view!r}; expected one of {VIEWS}")


def edit_distance(pred: ActionSequence, truth: ActionSequence, view: str = "action") -> float:
    """Levenshtein distance divided by the sequence length Z."""
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: prediction {len(pred)} vs truth {len(truth)}")
    if len(truth) == 0:
        return 0.0
    return levenshtein(_tokens(pred, view), _tokens(truth, view)) / len(truth)


def min_over_k(preds: Sequence[ActionSequence], truth: ActionSequence, view: str = "action") -> tuple[float, int]:
    """Best normalized distance over candidates and the index that attains it."""
    if len(preds) == 0:
        raise ValueError("no candidate sequences")
    dists = [edit_distance(p, truth, view) for p in preds]
    k = int(np.argmin(dists))
    return dists[k], k


def levenshtein_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise Levenshtein distances for integer token arrays of shape (P, Z)."""
    a, b = np.asarray(a), np.asarray(b)
    P, Za = a.shape
    Zb = b.shape[1]
    prev = np.tile(np.arange(Zb + 1), (P, 1))
    for i in range(1, Za + 1):
        cur = np.empty_like(prev)
        cur[:, 0] = i
        sub = prev[:, :-1] + (a[:, i - 1 : i] != b)
        dele = prev[:, 1:] + 1
        best = np.minimum(sub, dele)
        for j in range(1, Zb + 1):
            cur[:, j] = np.minimum(best[:, j - 1], cur[:, j - 1] + 1)
        prev = cur
    return prev[:, -1]


@dataclass
class EditDistanceReport:
    verb_ed: float
    noun_ed: float
    action_ed: float
    num_clips: int
    best_k: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verb_ed": self.verb_ed, "noun_ed": self.noun_ed, "action_ed": self.action_ed, "num_clips": self.num_clips}

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def evaluate_dataset(
    predictions: Mapping[str, Sequence[ActionSequence]],
    truths: Mapping[str, ActionSequence],
) -> EditDistanceReport:
    """Unweighted mean over clips of the best-of-K distance for each view."""
    missing = sorted(set(truths) - set(predictions))
    extra = sorted(set(predictions) - set(truths))
    if missing or extra:
        raise KeyError(f"clip mismatch: missing predictions {missing[:10]}, unknown clips {extra[:10]}")
    if not truths:
        raise ValueError("empty evaluation set")
    totals = dict.fromkeys(VIEWS, 0.0)
    best_k: dict[str, dict[str, int]] = {}
    for clip_id in sorted(truths):
        best_k[clip_id] = {}
        for view in VIEWS:
            d, k = min_over_k(predictions[clip_id], truths[clip_id], view)
            totals[view] += d
            best_k[clip_id][view] = k
    n = len(truths)
    return EditDistanceReport(
        verb_ed=totals["verb"] / n,
        noun_ed=totals["noun"] / n,
        action_ed=totals["action"] / n,
        num_clips=n,
        best_k=best_k,
    )


def write_predictions(path: str | Path, predictions: Mapping[str, np.ndarray]) -> None:
    """JSON lines ``{"clip_id": ..., "candidates": [[[verb, noun] x Z] x K]}`` sorted by id."""
    with Path(path).open("w") as fh:
        for clip_id in sorted(predictions):
            cands = np.asarray(predictions[clip_id]).astype(int).tolist()
            fh.write(json.dumps({"clip_id": clip_id, "candidates": cands}, separators=(",", ":")) + "\n")


def read_predictions(path: str | Path) -> dict[str, list[list[tuple[int, int]]]]:
    out = {}
    with Path(path).open() as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["clip_id"]] = [[tuple(p) for p in cand] for cand in rec["candidates"]]
    return out
