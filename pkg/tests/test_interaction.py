from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from querymamba.interaction import (
    ActionTaxonomy,
    CooccurrenceMatrix,
    IngestionError,
    ValidationError,
    apply_interaction,
    argmax_pairs,
    build_cooccurrence,
    build_taxonomy,
    joint_probabilities,
    load_cooccurrence,
    load_taxonomy,
    sample_sequences,
    save_cooccurrence,
    save_taxonomy,
)

# 8 events tallying to [[2, 0], [3, 3]]
TOY_PAIRS = [(0, 0), (0, 0), (1, 0), (1, 0), (1, 0), (1, 1), (1, 1), (1, 1)]
JOINT = np.array([[0.42, 0.18], [0.28, 0.12]])


def _exact_adjusted():
    # oracle: rational arithmetic on the same inputs
    fv, fn = [Fraction(6, 10), Fraction(4, 10)], [Fraction(7, 10), Fraction(3, 10)]
    counts = [[2, 0], [3, 3]]
    prod = [[fv[v] * fn[n] * Fraction(counts[v][n], 8) for n in range(2)] for v in range(2)]
    total = sum(sum(r) for r in prod)
    return np.array([[float(p / total) for p in r] for r in prod])


@pytest.fixture
def toy():
    return build_cooccurrence(TOY_PAIRS, 2, 2)


def _dist(rows, cols):
    return hnp.arrays(np.float64, (rows, cols), elements=st.floats(0.01, 1.0)).map(
        lambda a: a / a.sum(axis=-1, keepdims=True))


def test_toy_tally(toy):
    assert np.array_equal(toy.counts, [[2, 0], [3, 3]])
    assert np.array_equal(toy.O, [[0.25, 0.0], [0.375, 0.375]])
    assert toy.split == "train"


def test_single_pair_is_one_hot():
    assert np.array_equal(build_cooccurrence([(1, 2)], 2, 3).O, [[0, 0, 0], [0, 0, 1]])


def test_ingestion_errors():
    with pytest.raises(IngestionError, match="no annotations"):
        build_cooccurrence([], 2, 2)
    with pytest.raises(IngestionError, match="record 2"):
        build_cooccurrence([(0, 0), (1, 1), (2, 0)], 2, 2)


def test_taxonomy_from_tally(toy):
    tax = build_taxonomy(toy)
    assert tax.pairs == [(0, 0), (1, 0), (1, 1)] and len(tax) == 3
    assert tax.action_id(1, 0) == 1 and tax.pair(2) == (1, 1)
    assert tax.action_id(0, 1, default=-1) == -1
    with pytest.raises(KeyError):
        tax.action_id(0, 1)


def test_taxonomy_extremes():
    assert len(build_taxonomy(CooccurrenceMatrix(np.zeros((2, 3))))) == 0
    assert len(build_taxonomy(CooccurrenceMatrix(np.ones((2, 3))))) == 6
    with pytest.raises(ValidationError):
        ActionTaxonomy([(0, 0), (0, 0)])


def test_joint_example():
    joint = joint_probabilities(np.array([[0.6, 0.4]]), np.array([[0.7, 0.3]]))
    assert np.allclose(joint[0], JOINT, atol=1e-15)


def test_joint_rejects_unnormalized():
    with pytest.raises(ValidationError):
        joint_probabilities(np.array([[0.6, 0.5]]), np.array([[0.7, 0.3]]))


@given(_dist(3, 4), _dist(3, 5))
def test_joint_marginalizes_back(fv, fn):
    joint = joint_probabilities(fv, fn)
    assert np.allclose(joint.sum(axis=2), fv, atol=1e-14)
    assert np.allclose(joint.sum(axis=1), fn, atol=1e-14)


def test_adjusted_worked_example(toy):
    adjusted = apply_interaction(JOINT[None], toy.O).adjusted[0]
    assert np.allclose(adjusted, [[0.411765, 0.0], [0.411765, 0.176470]], atol=1e-6)
    assert np.allclose(adjusted, _exact_adjusted(), atol=1e-15)


def test_argmax_tie_goes_to_smallest_pair(toy):
    adjusted = apply_interaction(JOINT[None], toy.O).adjusted
    assert argmax_pairs(adjusted).tolist() == [[0, 0]]


def test_uniform_o_is_identity():
    assert np.allclose(apply_interaction(JOINT[None], np.full((2, 2), 0.25)).adjusted[0], JOINT, atol=1e-15)


def test_one_hot_o_collapses():
    O = np.zeros((2, 2))
    O[1, 0] = 1
    assert np.array_equal(apply_interaction(JOINT[None], O).adjusted[0], O)


def test_zero_mass_slot_falls_back(caplog):
    joint = np.array([[[1.0, 0.0], [0.0, 0.0]], [[0.25, 0.25], [0.25, 0.25]]])
    O = np.array([[0.0, 0.5], [0.5, 0.0]])
    result = apply_interaction(joint, O)
    assert result.fallback_slots == ((0,),)
    assert np.array_equal(result.adjusted[0], joint[0])
    assert np.allclose(result.adjusted[1], [[0, 0.5], [0.5, 0]])
    assert "slots" in caplog.text


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        apply_interaction(np.ones((1, 2, 3)) / 6, np.ones((3, 2)))


@given(_dist(2, 3), _dist(2, 4), hnp.arrays(np.int64, (3, 4), elements=st.integers(0, 20)),
       st.floats(1e-3, 1e3))
def test_scale_invariance(fv, fn, counts, c):
    counts[0, 0] += 1
    O = counts / counts.sum()
    joint = joint_probabilities(fv, fn)
    a = apply_interaction(joint, O).adjusted
    b = apply_interaction(joint, c * O).adjusted
    assert np.max(np.abs(a - b)) <= 1e-12
    assert np.array_equal(argmax_pairs(a), argmax_pairs(b))


@given(_dist(4, 3), _dist(4, 5), hnp.arrays(np.int64, (3, 5), elements=st.integers(0, 4)))
def test_interaction_keeps_slots_normalized(fv, fn, counts):
    counts[1, 1] += 1
    adjusted = apply_interaction(joint_probabilities(fv, fn), counts / counts.sum()).adjusted
    assert np.allclose(adjusted.sum(axis=(1, 2)), 1.0)
    assert np.all(adjusted[:, counts == 0] == 0)


# -- sampling -----------------------------------------------------------------

def test_sampling_matches_distribution():
    rng = np.random.default_rng(0)
    joint = np.array([[[0.1, 0.0, 0.3], [0.05, 0.5, 0.05]]])
    draws = sample_sequences(joint, 100_000, rng)[:, 0]
    freq = np.zeros((2, 3))
    np.add.at(freq, (draws[:, 0], draws[:, 1]), 1)
    assert np.max(np.abs(freq / len(draws) - joint[0])) < 0.01
    assert freq[0, 1] == 0


def test_sampling_deterministic_under_seed():
    joint = np.full((3, 2, 2), 0.25)
    a = sample_sequences(joint, 5, np.random.default_rng(9))
    b = sample_sequences(joint, 5, np.random.default_rng(9))
    assert a.shape == (5, 3, 2) and np.array_equal(a, b)


def test_one_hot_gives_identical_candidates():
    joint = np.zeros((2, 2, 3))
    joint[0, 1, 2] = joint[1, 0, 1] = 1
    out = sample_sequences(joint, 4, np.random.default_rng(0))
    assert (out == [[1, 2], [0, 1]]).all()


def test_never_samples_trailing_zero_bins():
    # mass only in the first bin; u * total rounding up must not reach later bins
    joint = np.zeros((1, 2, 2))
    joint[0, 0, 0] = 1.0
    out = sample_sequences(joint, 10_000, np.random.default_rng(1))
    assert (out == 0).all()


def test_argmax_mode_and_errors():
    joint = np.array([[[0.1, 0.2], [0.6, 0.1]]])
    assert sample_sequences(joint, 3, mode="argmax").tolist() == [[[1, 0]]] * 3
    with pytest.raises(ValueError):
        sample_sequences(joint, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_sequences(joint, 1, np.random.default_rng(0), mode="beam")


# -- files --------------------------------------------------------------------

def test_cooccurrence_file_round_trip(tmp_path, toy):
    path = tmp_path / "cooc.csv"
    save_cooccurrence(path, toy)
    assert path.read_text().splitlines()[0].startswith("#querymamba-cooc v1")
    back = load_cooccurrence(path)
    assert np.array_equal(back.counts, toy.counts) and back.split == "train"
    assert np.array_equal(back.O, toy.O)


def test_cooccurrence_file_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("verb_id,noun_id,count\n0,0,1\n")
    with pytest.raises(IngestionError):
        load_cooccurrence(bad)


def test_taxonomy_file_round_trip(tmp_path, toy):
    path = tmp_path / "taxonomy.csv"
    tax = build_taxonomy(toy)
    save_taxonomy(path, tax)
    assert load_taxonomy(path).pairs == tax.pairs
