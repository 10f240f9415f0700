"""Clip annotations, feature sequences and supervised examples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..encoder import MemorySequence
from ..numerics.rng import make_rng
from .world import SyntheticWorldSpec

WINDOW_SECONDS = 0.533


class InsufficientDurationError(ValueError):
    pass


class ExampleSkipped(ValueError):
    """A cut point cannot yield an example; the message gives the reason."""


@dataclass
class ClipAnnotation:
    clip_id: str
    events: list[tuple[float, float, int, int]]
    num_verbs: int
    num_nouns: int

    def __post_init__(self):
        self.events = [(float(s), float(e), int(v), int(n)) for s, e, v, n in self.events]
        last_end = -math.inf
        for i, (s, e, v, n) in enumerate(self.events):
            if e < s or s < last_end - 1e-9:
                raise ValueError(f"{self.clip_id}: event {i} overlaps or is out of order")
            if not (0 <= v < self.num_verbs and 0 <= n < self.num_nouns):
                raise ValueError(f"{self.clip_id}: event {i} has ids ({v}, {n}) outside vocabulary")
            last_end = e

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(v, n) for _, _, v, n in self.events]

    def label_at(self, t: float) -> tuple[int, int]:
        """(verb, noun) active at time ``t``, or (-1, -1) in a gap."""
        for s, e, v, n in self.events:
            if s <= t < e:
                return v, n
        return -1, -1

    def to_json(self) -> dict:
        return {
            "clip_id": self.clip_id,
            "num_verbs": self.num_verbs,
            "num_nouns": self.num_nouns,
            "events": [list(ev) for ev in self.events],
        }

    @classmethod
    def from_json(cls, data: dict) -> ClipAnnotation:
        return cls(data["clip_id"], [tuple(ev) for ev in data["events"]], data["num_verbs"], data["num_nouns"])


@dataclass
class FeatureSequence:
    clip_id: str
    embeddings: np.ndarray
    window_seconds: float = WINDOW_SECONDS

    @property
    def num_windows(self) -> int:
        return self.embeddings.shape[0]


def num_windows(duration_s: float, window_seconds: float) -> int:
    return int(math.floor(duration_s / window_seconds + 1e-9))


def sample_action_chain(world: SyntheticWorldSpec, length: int, rng: np.random.Generator, start: int | None = None) -> np.ndarray:
    """Indices into ``world.actions`` drawn from the Markov chain."""
    chain = np.empty(length, dtype=np.int64)
    if length == 0:
        return chain
    chain[0] = rng.integers(world.num_actions) if start is None else start
    cdf = np.cumsum(world.transitions, axis=1)
    for t in range(1, length):
        row = cdf[chain[t - 1]]
        chain[t] = min(np.searchsorted(row, rng.random() * row[-1], side="right"), world.num_actions - 1)
    return chain


def generate_clip(
    world: SyntheticWorldSpec,
    seed: int,
    duration_s: float,
    clip_id: str = "clip",
    min_events: int = 1,
) -> tuple[ClipAnnotation, FeatureSequence]:
    """Sample back-to-back events covering ``duration_s`` and their window embeddings.

    ``duration_s`` must guarantee ``min_events`` complete events even when
    every event has its longest possible duration.
    """
    if duration_s < min_events * world.max_event_seconds:
        raise InsufficientDurationError(
            f"{duration_s:.1f}s cannot guarantee {min_events} events of up to {world.max_event_seconds:.2f}s"
        )
    rng = make_rng(seed, "clip", clip_id)
    max_events = int(duration_s / (world.mean_durations.min() * (1.0 - world.duration_spread))) + 2
    chain = sample_action_chain(world, max_events, rng)
    events = []
    t = 0.0
    for a in chain:
        if t >= duration_s:
            break
        length = world.mean_durations[a] * rng.uniform(1.0 - world.duration_spread, 1.0 + world.duration_spread)
        v, n = world.actions[a]
        events.append((t, min(t + length, duration_s), v, n))
        t += length
    annotation = ClipAnnotation(clip_id, events, world.num_verbs, world.num_nouns)

    w = world.window_seconds
    T = num_windows(duration_s, w)
    starts = np.array([e[0] for e in events])
    centers = (np.arange(T) + 0.5) * w
    event_idx = np.searchsorted(starts, centers, side="right") - 1
    action_idx = np.array([world.actions.index((events[i][2], events[i][3])) for i in event_idx], dtype=np.int64)
    protos = world.prototypes()
    emb = protos[action_idx] + world.noise_std * rng.normal(size=(T, world.feature_dim))
    return annotation, FeatureSequence(clip_id, emb.astype(np.float32), w)


@dataclass
class Example:
    example_id: str
    clip_id: str
    cut_time: float
    memory: MemorySequence
    targets: np.ndarray
    frame_labels: np.ndarray


def make_example(
    annotation: ClipAnnotation,
    features: FeatureSequence,
    cut_time: float,
    long_len: int,
    short_len: int,
    num_future: int,
    example_id: str | None = None,
) -> Example:
    """Observation windows before ``cut_time`` and the next ``num_future`` events after it.

    The last ``short_len`` observed windows form short-term memory and up to
    ``long_len`` earlier ones long-term memory; missing windows are zero rows
    on the left with ``mask`` False and frame labels -1.
    """
    future = [ev for ev in annotation.events if ev[0] >= cut_time - 1e-9]
    if len(future) < num_future:
        raise ExampleSkipped(f"{annotation.clip_id}@{cut_time:.2f}: {len(future)} future actions < {num_future}")
    w = features.window_seconds
    n_obs = min(features.num_windows, num_windows(cut_time, w))
    if n_obs < 1:
        raise ExampleSkipped(f"{annotation.clip_id}@{cut_time:.2f}: no observed window before the cut")
    total = long_len + short_len
    take = min(n_obs, total)
    D = features.embeddings.shape[1]
    M = np.zeros((total, D), dtype=features.embeddings.dtype)
    M[total - take :] = features.embeddings[n_obs - take : n_obs]
    mask = np.zeros(total, dtype=bool)
    mask[total - take :] = True
    labels = np.full((total, 2), -1, dtype=np.int64)
    for row, win in zip(range(total - take, total), range(n_obs - take, n_obs)):
        labels[row] = annotation.label_at((win + 0.5) * w)
    targets = np.array([(v, n) for _, _, v, n in future[:num_future]], dtype=np.int64)
    return Example(
        example_id=example_id or annotation.clip_id,
        clip_id=annotation.clip_id,
        cut_time=float(cut_time),
        memory=MemorySequence(M, long_len, short_len, mask),
        targets=targets,
        frame_labels=labels,
    )


def choose_cut(annotation: ClipAnnotation, rng: np.random.Generator, min_observed_s: float, num_future: int) -> float:
    """Uniform cut time leaving at least ``min_observed_s`` before it and ``num_future`` events after."""
    events = annotation.events
    if len(events) < num_future:
        raise ExampleSkipped(f"{annotation.clip_id}: only {len(events)} events")
    latest = events[len(events) - num_future][0]
    if latest < min_observed_s:
        raise ExampleSkipped(f"{annotation.clip_id}: clip too short for {min_observed_s:.1f}s of observation")
    return float(rng.uniform(min_observed_s, latest))


def clip_duration_for(world: SyntheticWorldSpec, long_len: int, short_len: int, num_future: int) -> float:
    """Duration that always leaves room for a full observation and ``num_future`` events."""
    return (long_len + short_len + 1) * world.window_seconds + (num_future + 3) * world.max_event_seconds


def generate_split(
    world: SyntheticWorldSpec,
    num_clips: int,
    seed: int,
    split: str,
    long_len: int,
    short_len: int,
    num_future: int,
    cuts_per_clip: int = 1,
    duration_s: float | None = None,
) -> tuple[list[ClipAnnotation], list[FeatureSequence], list[Example]]:
    """Clips with fully observed memories; example ids are ``clip_id`` or ``clip_id#k``."""
    duration = duration_s or clip_duration_for(world, long_len, short_len, num_future)
    min_obs = (long_len + short_len) * world.window_seconds
    annotations, features, examples = [], [], []
    for i in range(num_clips):
        clip_id = f"{split}-{i:05d}"
        ann, feats = generate_clip(world, seed, duration, clip_id, min_events=num_future + 1)
        annotations.append(ann)
        features.append(feats)
        rng = make_rng(seed, "cuts", clip_id)
        for k in range(cuts_per_clip):
            ex_id = clip_id if cuts_per_clip == 1 else f"{clip_id}#{k}"
            try:
                cut = choose_cut(ann, rng, min_obs, num_future)
                examples.append(make_example(ann, feats, cut, long_len, short_len, num_future, ex_id))
            except ExampleSkipped:
                continue
    return annotations, features, examples
