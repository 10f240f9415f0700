"""Synthetic action world: affordances, Markov dynamics and emission prototypes."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..numerics.rng import make_rng


@dataclass
class SyntheticWorldSpec:
    """Desk-scale stand-in for a video dataset.

    Actions are the permitted (verb, noun) pairs of ``mask``, ordered by
    (verb, noun). ``transitions[i, j]`` is the probability that action ``j``
    follows action ``i``; there are no self transitions, so consecutive events
    differ. Each action has a mean duration; a clip window emits its action's
    prototype plus Gaussian noise.
    """

    num_verbs: int
    num_nouns: int
    sparsity: float
    seed: int
    mask: np.ndarray
    transitions: np.ndarray
    mean_durations: np.ndarray
    duration_spread: float = 0.5
    feature_dim: int = 32
    noise_std: float = 1.0
    two_stream: bool = False
    window_seconds: float = 0.533
    actions: list[tuple[int, int]] = field(init=False)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.mean_durations = np.asarray(self.mean_durations, dtype=float)
        verbs, nouns = np.nonzero(self.mask)
        self.actions = list(zip(verbs.tolist(), nouns.tolist()))
        A = len(self.actions)
        if not self.mask.any(axis=0).all():
            raise ValueError("every noun needs at least one permitted verb")
        if self.transitions.shape != (A, A) or not np.allclose(self.transitions.sum(axis=1), 1.0):
            raise ValueError("transition matrix must be (actions x actions) with rows summing to 1")
        if self.two_stream and self.feature_dim % 2:
            raise ValueError("two-stream emission needs an even feature_dim")

    @property
    def num_actions(self) -> int:
        return len(self.actions)

    @property
    def max_event_seconds(self) -> float:
        return float(self.mean_durations.max() * (1.0 + self.duration_spread))

    def prototypes(self) -> np.ndarray:
        """Emission prototype per action, shape (num_actions, feature_dim)."""
        rng = make_rng(self.seed, "prototypes")
        if not self.two_stream:
            return rng.normal(size=(self.num_actions, self.feature_dim))
        half = self.feature_dim // 2
        verb_proto = rng.normal(size=(self.num_verbs, half))
        noun_proto = rng.normal(size=(self.num_nouns, half))
        return np.array([np.concatenate([verb_proto[v], noun_proto[n]]) for v, n in self.actions])

    def to_json(self) -> dict:
        return {
            "num_verbs": self.num_verbs,
            "num_nouns": self.num_nouns,
            "sparsity": self.sparsity,
            "seed": self.seed,
            "mask": self.mask.astype(int).tolist(),
            "transitions": self.transitions.tolist(),
            "mean_durations": self.mean_durations.tolist(),
            "duration_spread": self.duration_spread,
            "feature_dim": self.feature_dim,
            "noise_std": self.noise_std,
            "two_stream": self.two_stream,
            "window_seconds": self.window_seconds,
        }

    @classmethod
    def from_json(cls, data: dict) -> SyntheticWorldSpec:
        return cls(**data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> SyntheticWorldSpec:
        return cls.from_json(json.loads(Path(path).read_text()))


def _affordance_mask(rng: np.random.Generator, V: int, N: int, sparsity: float) -> np.ndarray:
    mask = rng.random((V, N)) < sparsity
    for n in range(N):
        # a noun without any verb is redrawn until it has one
        while not mask[:, n].any():
            mask[:, n] = rng.random(V) < sparsity
    return mask


def generate_world(
    seed: int,
    num_verbs: int,
    num_nouns: int,
    sparsity: float,
    feature_dim: int = 32,
    noise_std: float = 1.0,
    successors: int = 2,
    leak: float = 0.05,
    duration_range: tuple[float, float] = (2.0, 6.0),
    duration_spread: float = 0.5,
    two_stream: bool = False,
    window_seconds: float = 0.533,
) -> SyntheticWorldSpec:
    """Random world; identical arguments give an identical world.

    Each action gets ``successors`` preferred next actions with Dirichlet
    weights sharing ``1 - leak`` of the mass; the rest is spread over all other
    actions so the chain is irreducible.
    """
    if num_verbs < 2 or num_nouns < 2:
        raise ValueError("need at least two verbs and two nouns")
    if not 0 < sparsity <= 1:
        raise ValueError("sparsity must lie in (0, 1]")
    rng = make_rng(seed, "world")
    mask = _affordance_mask(rng, num_verbs, num_nouns, sparsity)
    A = int(mask.sum())
    transitions = np.zeros((A, A))
    for i in range(A):
        others = np.array([j for j in range(A) if j != i])
        if len(others) == 0:
            transitions[i, i] = 1.0
            continue
        k = min(successors, len(others))
        chosen = rng.choice(others, size=k, replace=False)
        transitions[i, others] = leak / len(others)
        transitions[i, chosen] += (1.0 - leak) * rng.dirichlet(np.ones(k))
    mean_durations = rng.uniform(*duration_range, size=A)
    return SyntheticWorldSpec(
        num_verbs=num_verbs,
        num_nouns=num_nouns,
        sparsity=sparsity,
        seed=seed,
        mask=mask,
        transitions=transitions,
        mean_durations=mean_durations,
        duration_spread=duration_spread,
        feature_dim=feature_dim,
        noise_std=noise_std,
        two_stream=two_stream,
        window_seconds=window_seconds,
    )


def stationary_distribution(transitions: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(transitions.T)
    pi = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    return pi / pi.sum()
