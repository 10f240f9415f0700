import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from querymamba.dataio import (
    ClipAnnotation,
    ExampleSkipped,
    InsufficientDurationError,
    SyntheticWorldSpec,
    generate_clip,
    generate_split,
    generate_world,
    load_split,
    make_example,
    read_ego4d_lta,
    read_truths,
    stationary_distribution,
    write_split,
)
from querymamba.dataio.clips import clip_duration_for, sample_action_chain
from querymamba.numerics import make_rng


@pytest.fixture(scope="module")
def world():
    return generate_world(3, 6, 8, 0.4, feature_dim=8)


def test_dense_world():
    w = generate_world(0, 4, 5, 1.0)
    assert w.mask.all() and w.num_actions == 20


def test_world_is_deterministic():
    a, b = generate_world(5, 10, 20, 0.2), generate_world(5, 10, 20, 0.2)
    assert np.array_equal(a.mask, b.mask) and np.array_equal(a.transitions, b.transitions)
    assert np.array_equal(a.prototypes(), b.prototypes())
    assert not np.array_equal(a.mask, generate_world(6, 10, 20, 0.2).mask)


def test_sparsity_keeps_expected_pair_count():
    counts = [generate_world(s, 10, 20, 0.2).num_actions for s in range(40)]
    # 200 pairs at rate 0.2, plus a few redrawn nouns
    assert 36 <= np.mean(counts) <= 46


@given(st.integers(0, 10_000), st.floats(0.02, 1.0))
@settings(max_examples=25)
def test_world_invariants(seed, sparsity):
    w = generate_world(seed, 5, 7, sparsity)
    assert w.mask.any(axis=0).all()
    assert np.allclose(w.transitions.sum(axis=1), 1.0)
    if w.num_actions > 1:
        assert np.all(np.diag(w.transitions) == 0)


def test_world_argument_errors():
    with pytest.raises(ValueError):
        generate_world(0, 1, 5, 0.5)
    with pytest.raises(ValueError):
        generate_world(0, 3, 5, 0.0)


def test_world_json_round_trip(tmp_path, world):
    world.save(tmp_path / "world.json")
    back = SyntheticWorldSpec.load(tmp_path / "world.json")
    assert back.actions == world.actions
    assert np.array_equal(back.transitions, world.transitions)
    assert np.array_equal(back.prototypes(), world.prototypes())


def _transition_counts(world, steps, seed=0):
    chain = sample_action_chain(world, steps + 1, make_rng(seed, "chain"))
    counts = np.zeros_like(world.transitions)
    np.add.at(counts, (chain[:-1], chain[1:]), 1)
    return counts


def test_transition_rows_match_over_1e4_steps():
    # four actions, so every row is visited ~2500 times
    w = generate_world(0, 2, 2, 1.0)
    counts = _transition_counts(w, 10_000)
    freq = counts / counts.sum(axis=1, keepdims=True)
    assert np.max(np.abs(freq - w.transitions)) < 0.02


def test_pair_frequencies_match_stationary_flow(world):
    counts = _transition_counts(world, 10_000)
    expected = stationary_distribution(world.transitions)[:, None] * world.transitions
    assert np.max(np.abs(counts / counts.sum() - expected)) < 0.02


def test_zero_noise_emits_prototypes():
    w = generate_world(1, 4, 5, 0.5, feature_dim=6, noise_std=0.0)
    ann, feats = generate_clip(w, 0, 60.0)
    protos = w.prototypes().astype(np.float32)
    for t in range(feats.num_windows):
        v, n = ann.label_at((t + 0.5) * w.window_seconds)
        assert np.array_equal(feats.embeddings[t], protos[w.actions.index((v, n))])


def test_two_stream_prototypes_share_halves():
    w = generate_world(1, 3, 4, 1.0, feature_dim=6, two_stream=True)
    p = w.prototypes()
    a, b = w.actions.index((0, 1)), w.actions.index((0, 2))
    assert np.array_equal(p[a, :3], p[b, :3]) and not np.array_equal(p[a, 3:], p[b, 3:])


def test_clip_consistency(world):
    ann, feats = generate_clip(world, 7, 80.0, "c1")
    assert feats.num_windows == int(80.0 / world.window_seconds)
    assert all(world.mask[v, n] for v, n in ann.pairs)
    assert all(a != b for a, b in zip(ann.pairs, ann.pairs[1:]))
    assert ann.events[0][0] == 0.0 and ann.events[-1][1] == pytest.approx(80.0)
    again = generate_clip(world, 7, 80.0, "c1")
    assert again[0].events == ann.events and np.array_equal(again[1].embeddings, feats.embeddings)


def test_clip_duration_check(world):
    with pytest.raises(InsufficientDurationError):
        generate_clip(world, 0, 5.0, min_events=10)


def test_annotation_validation():
    with pytest.raises(ValueError):
        ClipAnnotation("x", [(0, 2, 0, 0), (1, 3, 1, 1)], 2, 2)
    with pytest.raises(ValueError):
        ClipAnnotation("x", [(0, 2, 0, 5)], 2, 2)


def test_make_example_targets_follow_cut(world):
    ann, feats = generate_clip(world, 2, 120.0, "c2")
    cut = 30.0
    ex = make_example(ann, feats, cut, long_len=20, short_len=10, num_future=5)
    expected = [(v, n) for s, _, v, n in ann.events if s >= cut][:5]
    assert [tuple(t) for t in ex.targets] == expected
    assert ex.memory.M.shape == (30, 8) and ex.memory.mask.all()
    last = int(cut / world.window_seconds) - 1
    assert np.array_equal(ex.memory.M[-1], feats.embeddings[last])


def test_make_example_pads_short_history(world):
    ann, feats = generate_clip(world, 2, 120.0, "c3")
    ex = make_example(ann, feats, 2.0, long_len=20, short_len=10, num_future=3)
    n_obs = int(2.0 / world.window_seconds)
    assert ex.memory.mask.sum() == n_obs and not ex.memory.mask[0]
    assert (ex.memory.M[~ex.memory.mask] == 0).all()
    assert (ex.frame_labels[~ex.memory.mask] == -1).all()
    assert len(ex.targets) == 3


def test_make_example_skips(world):
    ann, feats = generate_clip(world, 2, 40.0, "c4")
    with pytest.raises(ExampleSkipped):
        make_example(ann, feats, 0.1, 4, 4, 2)
    with pytest.raises(ExampleSkipped):
        make_example(ann, feats, 39.0, 4, 4, 5)


def test_split_round_trip(tmp_path, world):
    anns, feats, exs = generate_split(world, 4, 0, "val", long_len=6, short_len=4, num_future=3, cuts_per_clip=2)
    assert [e.example_id for e in exs[:2]] == ["val-00000#0", "val-00000#1"]
    write_split(tmp_path / "val", anns, feats, exs)
    back = load_split(tmp_path / "val", 6, 4, 3)
    assert [e.example_id for e in back] == [e.example_id for e in exs]
    for a, b in zip(exs, back):
        assert np.array_equal(a.memory.M, b.memory.M) and np.array_equal(a.targets, b.targets)
        assert np.array_equal(a.memory.mask, b.memory.mask)
    truths = read_truths(tmp_path / "val")
    assert truths[exs[0].example_id] == [tuple(t) for t in exs[0].targets.tolist()]
    sidecar = json.loads((tmp_path / "val" / "features" / "val-00000.json").read_text())
    assert sidecar["shape"] == list(feats[0].embeddings.shape)
    raw = np.fromfile(tmp_path / "val" / "features" / "val-00000.bin", dtype="<f4")
    assert np.array_equal(raw.reshape(sidecar["shape"]), feats[0].embeddings)


def test_split_clip_duration_is_sufficient(world):
    d = clip_duration_for(world, 48, 24, 8)
    _, _, exs = generate_split(world, 10, 1, "train", 48, 24, 8, duration_s=d)
    assert len(exs) == 10 and all(e.memory.mask.all() for e in exs)


def test_ego4d_reader(tmp_path):
    records = {"clips": [
        {"clip_uid": "b", "action_idx": 1, "action_clip_start_sec": 4.0, "action_clip_end_sec": 6.0,
         "verb_label": 2, "noun_label": 1},
        {"clip_uid": "b", "action_idx": 0, "action_clip_start_sec": 0.0, "action_clip_end_sec": 3.0,
         "verb_label": 0, "noun_label": 4},
        {"clip_uid": "a", "action_idx": 0, "action_clip_start_sec": 1.0, "action_clip_end_sec": 2.0,
         "verb_label": 1, "noun_label": 1},
    ]}
    path = tmp_path / "fho_lta_val.json"
    path.write_text(json.dumps(records))
    anns = read_ego4d_lta(path, num_verbs=3, num_nouns=5)
    assert [a.clip_id for a in anns] == ["a", "b"]
    assert anns[1].pairs == [(0, 4), (2, 1)]
