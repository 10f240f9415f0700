"""Turning model outputs (or baseline distributions) into K candidate sequences."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..dataio.clips import Example
from ..interaction import CooccurrenceMatrix, apply_interaction, joint_probabilities, sample_sequences
from ..numerics.rng import make_rng
from ..numerics.tensor import default_dtype, no_grad
from .model import QueryMamba
from .train import collate


class VocabularyMismatch(ValueError):
    pass


@dataclass
class Distributions:
    ids: list[str]
    verb_probs: np.ndarray
    noun_probs: np.ndarray
    action_probs: np.ndarray | None = None


def predict_distributions(model: QueryMamba, examples: Sequence[Example], batch_size: int = 64) -> Distributions:
    verbs, nouns, actions = [], [], []
    with no_grad(), default_dtype(model.config.dtype):
        for start in range(0, len(examples), batch_size):
            batch = collate(examples[start : start + batch_size])
            preds = model(batch.M, batch.mask).predictions
            verbs.append(preds.verb_probs)
            nouns.append(preds.noun_probs)
            if preds.action_logits is not None:
                actions.append(preds.action_probs)
    return Distributions(
        ids=[ex.example_id for ex in examples],
        verb_probs=np.concatenate(verbs),
        noun_probs=np.concatenate(nouns),
        action_probs=np.concatenate(actions) if actions else None,
    )


def decode(
    dists: Distributions,
    K: int = 5,
    mode: str = "sample",
    cooc: CooccurrenceMatrix | None = None,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """Candidate sequences (K, Z, 2) per example id.

    Each example samples from its own stream derived from ``(seed, id)``, so
    switching the interaction on or off reuses the same uniforms. Argmax mode
    returns a single candidate.
    """
    if cooc is not None:
        V, N = dists.verb_probs.shape[-1], dists.noun_probs.shape[-1]
        if (cooc.num_verbs, cooc.num_nouns) != (V, N):
            raise VocabularyMismatch(
                f"model predicts {V} verbs x {N} nouns, co-occurrence file has {cooc.num_verbs} x {cooc.num_nouns}"
            )
    out = {}
    for i, ex_id in enumerate(dists.ids):
        fv, fn = dists.verb_probs[i], dists.noun_probs[i]
        if mode == "argmax" and cooc is None:
            out[ex_id] = np.stack([fv.argmax(axis=-1), fn.argmax(axis=-1)], axis=-1)[None]
            continue
        joint = joint_probabilities(fv, fn)
        if cooc is not None:
            joint = apply_interaction(joint, cooc.O).adjusted
        if mode == "argmax":
            out[ex_id] = sample_sequences(joint, 1, mode="argmax")
        else:
            out[ex_id] = sample_sequences(joint, K, make_rng(seed, "decode", ex_id))
    return out


def decode_actions(dists: Distributions, taxonomy_pairs: Sequence[tuple[int, int]]) -> dict[str, np.ndarray]:
    """Argmax of the direct action head, mapped back to (verb, noun) pairs."""
    if dists.action_probs is None:
        raise ValueError("model has no action head")
    pairs = np.asarray(taxonomy_pairs, dtype=np.int64)
    return {ex_id: pairs[dists.action_probs[i].argmax(axis=-1)][None] for i, ex_id in enumerate(dists.ids)}


def infer(
    model: QueryMamba,
    examples: Sequence[Example],
    use_interaction: bool = False,
    cooc: CooccurrenceMatrix | None = None,
    K: int | None = None,
    mode: str | None = None,
    seed: int | None = None,
) -> dict[str, np.ndarray]:
    """encode -> decode -> heads -> (interaction) -> candidates."""
    if use_interaction and cooc is None:
        raise ValueError("use_interaction needs a co-occurrence matrix")
    c = model.config
    dists = predict_distributions(model, examples)
    return decode(
        dists,
        K=c.num_candidates if K is None else K,
        mode=c.decode_mode if mode is None else mode,
        cooc=cooc if use_interaction else None,
        seed=c.seed if seed is None else seed,
    )


def marginal_distributions(examples: Sequence[Example], num_verbs: int, num_nouns: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot verb and noun frequencies of the training targets, (Z, V) and (Z, N)."""
    targets = np.stack([ex.targets for ex in examples])
    Z = targets.shape[1]
    fv = np.zeros((Z, num_verbs))
    fn = np.zeros((Z, num_nouns))
    for z in range(Z):
        fv[z] = np.bincount(targets[:, z, 0], minlength=num_verbs)
        fn[z] = np.bincount(targets[:, z, 1], minlength=num_nouns)
    return fv / fv.sum(axis=1, keepdims=True), fn / fn.sum(axis=1, keepdims=True)


def baseline_distributions(train: Sequence[Example], evaluate_on: Sequence[Example], num_verbs: int, num_nouns: int) -> Distributions:
    """Same marginal prediction for every evaluated example."""
    fv, fn = marginal_distributions(train, num_verbs, num_nouns)
    n = len(evaluate_on)
    return Distributions(
        ids=[ex.example_id for ex in evaluate_on],
        verb_probs=np.broadcast_to(fv, (n,) + fv.shape).copy(),
        noun_probs=np.broadcast_to(fn, (n,) + fn.shape).copy(),
    )


def truths_of(examples: Sequence[Example]) -> dict[str, list[tuple[int, int]]]:
    return {ex.example_id: [tuple(p) for p in ex.targets.tolist()] for ex in examples}
