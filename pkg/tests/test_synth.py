"""Synthetic generator: determinism, truncation, profile separability."""

import numpy as np
import pytest

from tckd.data import derive_times, split_dataset
from tckd.synth import TypingProfile, synth_generate

PHRASES = ["the cat sat", "a dog ran", "we type here"]


def test_same_seed_bit_identical():
    a = synth_generate(3, 5, PHRASES, seed=9)
    b = synth_generate(3, 5, PHRASES, seed=9)
    assert a == b
    for s1, s2 in zip(a, b):
        assert [e.press_ms for e in s1.events] == [e.press_ms for e in s2.events]


def test_different_seed_differs():
    a = synth_generate(2, 3, PHRASES, seed=1)
    b = synth_generate(2, 3, PHRASES, seed=2)
    assert a != b


def test_all_times_at_least_one_ms():
    samples = synth_generate(4, 10, PHRASES, seed=0, jitter_range=(25.0, 25.0))
    for s in samples:
        assert all(h >= 1.0 for h in s.hold_ms)
        assert all(f >= 1.0 for f in s.flight_ms[1:])
        assert s.flight_ms[0] == 0.0


def test_events_consistent_with_derived_times():
    samples = synth_generate(2, 4, PHRASES, seed=3)
    for s in samples:
        holds, flights = derive_times(s.events)
        assert np.allclose(holds, s.hold_ms)
        assert np.allclose(flights, s.flight_ms)


def test_minimum_two_users():
    with pytest.raises(ValueError, match="2 users"):
        synth_generate(1, 5, PHRASES, seed=0)


def test_empty_phrase_pool_rejected():
    with pytest.raises(ValueError, match="phrase pool"):
        synth_generate(2, 5, [], seed=0)


def test_shared_pool_means_overlapping_content():
    samples = synth_generate(2, 30, PHRASES, seed=4)
    texts_u0 = {s.text() for s in samples if s.user_id == "u00"}
    texts_u1 = {s.text() for s in samples if s.user_id == "u01"}
    assert texts_u0 & texts_u1  # both users typed identical content


def test_distant_profiles_manhattan_separable():
    # two users with far-apart constant profiles: the Manhattan baseline
    # from the baselines module must classify a 20-sample test set perfectly
    from tckd.baselines import build_profiles, manhattan_classify, manhattan_features

    alphabet = sorted({c for p in PHRASES for c in p})
    profiles = [TypingProfile.constant(alphabet, 80.0, 40.0, 10.0),
                TypingProfile.constant(alphabet, 180.0, 140.0, 10.0)]
    samples = synth_generate(2, 50, PHRASES, seed=7, profiles=profiles)
    split = split_dataset(samples, test_ratio=0.2, seed=7)
    assert len(split.test_raw) == 20
    enrolled = build_profiles(split.train_raw)
    preds = [manhattan_classify(manhattan_features(s), enrolled) for s in split.test_raw]
    assert all(p == s.user_id for p, s in zip(preds, split.test_raw))
