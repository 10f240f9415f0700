"""Verb-noun co-occurrence statistics and dataset-aware joint sampling.

Independent verb and noun distributions are combined into a per-slot joint by
an outer product, reweighted elementwise by the normalized co-occurrence
matrix ``O`` and renormalized. Pairs never seen in the annotations get zero
mass, so they are never sampled.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

logger = logging.getLogger(__name__)

COOC_MAGIC = "#querymamba-cooc"
COOC_VERSION = 1


class IngestionError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class CooccurrenceMatrix:
    counts: np.ndarray
    smoothing: float = 0.0
    split: str = "train"

    @property
    def num_verbs(self) -> int:
        return self.counts.shape[0]

    @property
    def num_nouns(self) -> int:
        return self.counts.shape[1]

    @property
    def O(self) -> np.ndarray:
        """Globally normalized matrix (sums to one)."""
        weights = self.counts.astype(float) + self.smoothing
        return weights / weights.sum()


def build_cooccurrence(
    pairs: Iterable[tuple[int, int]],
    num_verbs: int,
    num_nouns: int,
    smoothing: float = 0.0,
    split: str = "train",
) -> CooccurrenceMatrix:
    counts = np.zeros((num_verbs, num_nouns), dtype=np.int64)
    for i, (v, n) in enumerate(pairs):
        if not (0 <= v < num_verbs and 0 <= n < num_nouns):
            raise IngestionError(f"record {i}: pair ({v}, {n}) outside vocabulary {num_verbs}x{num_nouns}")
        counts[v, n] += 1
    if counts.sum() == 0:
        raise IngestionError("no annotations: cannot normalize an empty co-occurrence matrix")
    return CooccurrenceMatrix(counts=counts, smoothing=smoothing, split=split)


@dataclass
class ActionTaxonomy:
    """Every (verb, noun) pair with at least one occurrence, sorted."""

    pairs: list[tuple[int, int]]
    index: dict[tuple[int, int], int] = field(init=False)

    def __post_init__(self):
        self.pairs = [(int(v), int(n)) for v, n in self.pairs]
        self.index = {p: i for i, p in enumerate(self.pairs)}
        if len(self.index) != len(self.pairs):
            raise ValidationError("duplicate pairs in taxonomy")

    def __len__(self) -> int:
        return len(self.pairs)

    def action_id(self, verb: int, noun: int, default: int | None = None) -> int:
        aid = self.index.get((int(verb), int(noun)), default)
        if aid is None:
            raise KeyError(f"pair ({verb}, {noun}) not in taxonomy")
        return aid

    def pair(self, action_id: int) -> tuple[int, int]:
        return self.pairs[action_id]


def build_taxonomy(cooc: CooccurrenceMatrix) -> ActionTaxonomy:
    verbs, nouns = np.nonzero(cooc.counts)
    return ActionTaxonomy(list(zip(verbs.tolist(), nouns.tolist())))


def _check_rows(p: np.ndarray, name: str, atol: float) -> None:
    if np.any(p < -atol) or not np.allclose(p.sum(axis=-1), 1.0, rtol=0.0, atol=atol):
        raise ValidationError(f"{name} rows must be probability distributions")


def joint_probabilities(verb_probs: np.ndarray, noun_probs: np.ndarray, atol: float = 1e-6) -> np.ndarray:
    """Per-slot outer product ``(Z, V) x (Z, N) -> (Z, V, N)``; leading axes broadcast."""
    verb_probs = np.asarray(verb_probs, dtype=float)
    noun_probs = np.asarray(noun_probs, dtype=float)
    _check_rows(verb_probs, "verb", atol)
    _check_rows(noun_probs, "noun", atol)
    return verb_probs[..., :, None] * noun_probs[..., None, :]


@dataclass
class JointActionDistribution:
    actions: np.ndarray
    adjusted: np.ndarray
    fallback_slots: tuple = ()


def apply_interaction(actions: np.ndarray, O: np.ndarray) -> JointActionDistribution:
    """Reweight each slot's joint by ``O`` and renormalize.

    A slot whose reweighted mass is zero keeps its unadjusted joint and is
    listed in ``fallback_slots`` (a warning is logged).
    """
    actions = np.asarray(actions, dtype=float)
    O = np.asarray(O, dtype=float)
    if actions.shape[-2:] != O.shape:
        raise ValidationError(f"joint {actions.shape} does not match co-occurrence {O.shape}")
    product = actions * O
    mass = product.sum(axis=(-2, -1), keepdims=True)
    dead = mass[..., 0, 0] <= 0
    adjusted = np.where(dead[..., None, None], actions, product / np.where(mass > 0, mass, 1.0))
    fallback = tuple(tuple(int(i) for i in idx) for idx in np.argwhere(dead))
    if fallback:
        logger.warning("interaction removed all mass for slots %s; using unadjusted joint", fallback)
    return JointActionDistribution(actions=actions, adjusted=adjusted, fallback_slots=fallback)


def argmax_pairs(joint: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Most probable (verb, noun) per slot; near-ties go to the smallest pair.

    Values within ``rtol`` of the maximum count as tied so that products that
    are equal in exact arithmetic are not split by rounding.
    """
    Z, V, N = joint.shape
    flat = joint.reshape(Z, V * N)
    best = flat.max(axis=1, keepdims=True)
    first = np.argmax(flat >= best * (1.0 - rtol), axis=1)
    return np.stack([first // N, first % N], axis=1)


def sample_sequences(
    joint: np.ndarray,
    K: int,
    rng: np.random.Generator | None = None,
    mode: str = "sample",
) -> np.ndarray:
    """``K`` candidate sequences, shape (K, Z, 2) of (verb, noun) ids.

    In sample mode each slot is drawn jointly from its distribution with one
    uniform per (k, z); in argmax mode every candidate is the per-slot mode.
    """
    joint = np.asarray(joint, dtype=float)
    if K < 1:
        raise ValueError("K must be at least 1")
    Z, V, N = joint.shape
    if mode == "argmax":
        return np.broadcast_to(argmax_pairs(joint), (K, Z, 2)).copy()
    if mode != "sample":
        raise ValueError(f"unknown decode mode {mode!r}")
    if rng is None:
        raise ValueError("sampling needs a random generator")
    probs = joint.reshape(Z, V * N)
    cdf = np.cumsum(probs, axis=1)
    last = V * N - 1 - np.argmax(probs[:, ::-1] > 0, axis=1)
    u = rng.random((K, Z)) * cdf[:, -1]
    flat = np.empty((K, Z), dtype=np.int64)
    for z in range(Z):
        # side="right" never lands on a zero-width (zero-probability) bin;
        # the clamp covers u rounding up to the total mass
        flat[:, z] = np.minimum(np.searchsorted(cdf[z], u[:, z], side="right"), last[z])
    return np.stack([flat // N, flat % N], axis=-1)


# -- files -------------------------------------------------------------------

def save_cooccurrence(path: str | Path, cooc: CooccurrenceMatrix) -> None:
    """CSV of nonzero ``verb_id,noun_id,count`` triplets under a versioned header line."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(
            f"{COOC_MAGIC} v{COOC_VERSION} num_verbs={cooc.num_verbs} num_nouns={cooc.num_nouns} "
            f"split={cooc.split} smoothing={cooc.smoothing!r}\n"
        )
        writer = csv.writer(fh)
        writer.writerow(["verb_id", "noun_id", "count"])
        for v, n in zip(*np.nonzero(cooc.counts)):
            writer.writerow([int(v), int(n), int(cooc.counts[v, n])])


def load_cooccurrence(path: str | Path) -> CooccurrenceMatrix:
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline().split()
        if not header or header[0] != COOC_MAGIC:
            raise IngestionError(f"{path}: missing co-occurrence header")
        if header[1] != f"v{COOC_VERSION}":
            raise IngestionError(f"{path}: unsupported version {header[1]}")
        meta = dict(item.split("=", 1) for item in header[2:])
        counts = np.zeros((int(meta["num_verbs"]), int(meta["num_nouns"])), dtype=np.int64)
        reader = csv.DictReader(fh)
        for line, row in enumerate(reader, start=3):
            v, n, c = int(row["verb_id"]), int(row["noun_id"]), int(row["count"])
            if not (0 <= v < counts.shape[0] and 0 <= n < counts.shape[1]) or c < 0:
                raise IngestionError(f"{path}:{line}: invalid triplet ({v}, {n}, {c})")
            counts[v, n] += c
    return CooccurrenceMatrix(counts=counts, smoothing=float(meta.get("smoothing", 0.0)), split=meta.get("split", "train"))


def save_taxonomy(path: str | Path, taxonomy: ActionTaxonomy) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["action_id", "verb_id", "noun_id"])
        for i, (v, n) in enumerate(taxonomy.pairs):
            writer.writerow([i, v, n])


def load_taxonomy(path: str | Path) -> ActionTaxonomy:
    with Path(path).open(newline="") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["action_id"]))
    ids = [int(r["action_id"]) for r in rows]
    if ids != list(range(len(ids))):
        raise IngestionError(f"{path}: action ids must be contiguous from 0")
    return ActionTaxonomy([(int(r["verb_id"]), int(r["noun_id"])) for r in rows])
