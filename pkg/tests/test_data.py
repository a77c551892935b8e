"""Data-layer laws: time derivation fixtures, CSV round-trips, vocabulary and
greedy segmentation rules, normalization, stratified split."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tckd.data import (CLS_ID, PAD_ID, UNK_ID, DataFormatError, KeystrokeEvent, KeystrokeSample,
                       MalformedEventError, SplitError, TimeStats, build_vocab,
                       compute_time_stats, derive_times, greedy_segment, make_sample,
                       normalize_times, parse_dataset, split_dataset, stratified_split,
                       tokenize_align, write_dataset)


def ev(press, release, char="a"):
    return KeystrokeEvent(ord(char), char, float(press), float(release))


# ---------------------------------------------------------------------------
# derive_times


def test_hold_is_release_minus_press():
    holds, flights = derive_times([ev(0, 100)])
    assert holds == [100.0]
    assert flights == [0.0]


def test_flight_between_consecutive_keys():
    holds, flights = derive_times([ev(0, 100), ev(150, 230)])
    assert flights == [0.0, 50.0]
    assert holds == [100.0, 80.0]


def test_overlapping_keys_give_negative_flight():
    # second key pressed before the first is released: overlap preserved
    holds, flights = derive_times([ev(0, 100), ev(80, 160)])
    assert flights[1] == -20.0
    assert holds[1] == 80.0


def test_press_to_press_flight_mode():
    _, flights = derive_times([ev(0, 100), ev(80, 160)], flight_mode="press_to_press")
    assert flights[1] == 80.0


def test_release_before_press_rejected():
    with pytest.raises(MalformedEventError, match="release"):
        derive_times([KeystrokeEvent(65, "a", 100.0, 50.0)])


# ---------------------------------------------------------------------------
# csv schemas


def two_user_samples():
    s1 = make_sample("u01", [ev(0, 100, "h"), ev(150, 260, "i")], "s000")
    s2 = make_sample("u00", [ev(0, 90, "y"), ev(80, 170, "o"), ev(240, 300, " ")], "s000")
    s3 = make_sample("u01", [ev(0, 75, "n"), ev(60, 130, "o")], "s001")
    return [s1, s2, s3]


@pytest.mark.parametrize("fmt", ["precomputed", "timestamps"])
def test_roundtrip_both_schemas(tmp_path, fmt):
    samples = two_user_samples()
    path = tmp_path / f"data_{fmt}.csv"
    write_dataset(samples, path, fmt)
    parsed = parse_dataset(path, fmt)
    assert parsed == samples


def test_timestamps_schema_preserves_raw_times(tmp_path):
    samples = two_user_samples()
    path = tmp_path / "data.csv"
    write_dataset(samples, path, "timestamps")
    parsed = parse_dataset(path, "timestamps")
    for a, b in zip(parsed, samples):
        assert [e.press_ms for e in a.events] == [e.press_ms for e in b.events]
        assert [e.release_ms for e in a.events] == [e.release_ms for e in b.events]


def test_precomputed_row_mapping(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("user_id,key_code,hold_ms,flight_ms,char\nu07,65,120,35,a\nu07,66,90,12,b\n")
    (sample,) = parse_dataset(path, "precomputed")
    assert sample.user_id == "u07"
    assert sample.events[0].key_code == 65
    assert sample.hold_ms == [120.0, 90.0]
    assert sample.flight_ms == [35.0, 12.0]
    assert sample.chars == ["a", "b"]


def test_two_users_two_groups(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("user_id,key_code,hold_ms,flight_ms,char\n"
                    "ua,65,100,0,a\nub,66,110,0,b\nua,67,105,20,c\n")
    samples = parse_dataset(path, "precomputed")
    assert [s.user_id for s in samples] == ["ua", "ub"]
    assert len(samples[0].events) == 2


def test_blank_line_starts_new_session(tmp_path):
    path = tmp_path / "sessions.csv"
    path.write_text("user_id,key_code,hold_ms,flight_ms,char\n"
                    "ua,65,100,0,a\n\nua,66,110,0,b\n")
    samples = parse_dataset(path, "precomputed")
    assert len(samples) == 2
    assert samples[0].session_id != samples[1].session_id


def test_timestamps_format_matches_precomputed_after_derivation(tmp_path):
    # 5-key fixture: derive_times applied by hand
    events = [ev(0, 80, "a"), ev(100, 170, "b"), ev(150, 240, "c"),
              ev(260, 320, "d"), ev(320, 410, "e")]
    hand_holds = [80.0, 70.0, 90.0, 60.0, 90.0]
    hand_flights = [0.0, 20.0, -20.0, 20.0, 0.0]
    sample = make_sample("u0", events)
    assert sample.hold_ms == hand_holds
    assert sample.flight_ms == hand_flights

    ts_path = tmp_path / "ts.csv"
    write_dataset([sample], ts_path, "timestamps")
    pc_path = tmp_path / "pc.csv"
    write_dataset([sample], pc_path, "precomputed")
    from_ts = parse_dataset(ts_path, "timestamps")[0]
    from_pc = parse_dataset(pc_path, "precomputed")[0]
    assert from_ts.hold_ms == from_pc.hold_ms == hand_holds
    assert from_ts.flight_ms == from_pc.flight_ms == hand_flights


def test_unknown_schema_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("user,code\nx,1\n")
    with pytest.raises(DataFormatError, match="schema"):
        parse_dataset(path, "precomputed")


def test_non_numeric_time_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("user_id,key_code,hold_ms,flight_ms,char\nu,65,abc,0,a\n")
    with pytest.raises(DataFormatError, match="non-numeric"):
        parse_dataset(path, "precomputed")


def test_empty_file_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(DataFormatError, match="empty"):
        parse_dataset(path, "precomputed")


def test_bad_format_name_rejected(tmp_path):
    with pytest.raises(DataFormatError, match="format"):
        parse_dataset(tmp_path / "x.csv", "excel")


@st.composite
def random_samples(draw):
    num_users = draw(st.integers(1, 3))
    samples = []
    for u in range(num_users):
        for sess in range(draw(st.integers(1, 2))):
            n = draw(st.integers(1, 6))
            events = []
            press = 0.0
            release = 0.0
            for j in range(n):
                hold = draw(st.integers(0, 300))
                flight = 0.0 if j == 0 else draw(st.integers(-min(200, int(release - press_prev if j > 1 else release)), 400))
                press_prev = press
                press = 0.0 if j == 0 else max(0.0, release + flight)
                release = press + hold
                char = draw(st.sampled_from("ab c,\"'x"))
                events.append(KeystrokeEvent(ord(char), char, press, release))
            samples.append(make_sample(f"u{u}", events, f"s{sess:03d}"))
    return samples


@given(random_samples(), st.sampled_from(["precomputed", "timestamps"]))
@settings(max_examples=40, deadline=None)
def test_roundtrip_property(tmp_path_factory, samples, fmt):
    path = tmp_path_factory.mktemp("rt") / "data.csv"
    write_dataset(samples, path, fmt)
    assert parse_dataset(path, fmt) == samples


# ---------------------------------------------------------------------------
# vocabulary + segmentation


def test_frequency_rule_and_char_fallback():
    vocab = build_vocab(["the the cat"], max_subwords=50)
    assert "the" in vocab.subword_ids
    assert "cat" not in vocab.subword_ids
    for c in "thecat ":
        assert c in vocab.char_ids
    assert greedy_segment("cat", vocab) == ["c", "a", "t"]
    assert greedy_segment("the", vocab) == ["the"]


def test_every_corpus_char_has_id():
    corpus = ["ab ba", "xyz zyx!"]
    vocab = build_vocab(corpus, max_subwords=10)
    for c in set("".join(corpus)):
        assert c in vocab.char_ids


def test_vocab_size_bound():
    corpus = ["aa bb aa bb cc dd ee ff", "gg hh aa bb"]
    max_subwords = 3
    vocab = build_vocab(corpus, max_subwords)
    distinct_chars = len(set("".join(corpus)))
    assert vocab.num_subwords <= max_subwords + 3 + distinct_chars


def test_specials_occupy_fixed_ids():
    vocab = build_vocab(["a b a b"], max_subwords=5)
    assert vocab.subword_ids["[PAD]"] == PAD_ID == 0
    assert vocab.subword_ids["[UNK]"] == UNK_ID == 1
    assert vocab.subword_ids["[CLS]"] == CLS_ID == 2
    ids = sorted(vocab.subword_ids.values())
    assert ids == list(range(len(ids)))  # dense, 0-based
    cids = sorted(vocab.char_ids.values())
    assert cids == list(range(len(cids)))


def test_empty_corpus_rejected():
    with pytest.raises(DataFormatError, match="empty"):
        build_vocab([], max_subwords=5)
    with pytest.raises(DataFormatError, match="empty"):
        build_vocab(["", ""], max_subwords=5)


# ---------------------------------------------------------------------------
# normalization


def test_normalize_zero_at_train_mean():
    stats = TimeStats(d_mean=100.0, d_std=20.0, f_mean=50.0, f_std=10.0)
    d, f = normalize_times([100.0], [50.0], stats)
    assert d == [0.0] and f == [0.0]


def test_normalize_zero_std_falls_back_to_centering():
    samples = [make_sample("u", [ev(0, 100, "a"), ev(150, 250, "b")])]
    stats = compute_time_stats(samples)
    assert stats.d_std == 0.0  # constant holds
    d, _ = normalize_times([100.0, 100.0], [0.0, 50.0], stats)
    assert d == [0.0, 0.0]


def test_normalize_hand_fixture():
    # four values, stats computed by hand: mean 5, std sqrt(5)
    values = [2.0, 4.0, 6.0, 8.0]
    stats = TimeStats(d_mean=5.0, d_std=math.sqrt(5.0), f_mean=0.0, f_std=1.0)
    d, _ = normalize_times(values, [0.0] * 4, stats)
    expected = [(v - 5.0) / math.sqrt(5.0) for v in values]
    assert np.allclose(d, expected, atol=1e-15)


def test_normalize_clips_at_five_sigma():
    stats = TimeStats(d_mean=0.0, d_std=1.0, f_mean=0.0, f_std=1.0)
    d, f = normalize_times([100.0], [-100.0], stats)
    assert d == [5.0] and f == [-5.0]


# ---------------------------------------------------------------------------
# tokenize_align


def make_typed_sample(text, user="u0", hold=100.0):
    events = []
    t = 0.0
    for c in text:
        events.append(KeystrokeEvent(ord(c), c, t, t + hold))
        t += hold + 30.0
    return make_sample(user, events)


def neutral_stats():
    # wide std so raw millisecond values pass through as value/100, unclipped
    return TimeStats(d_mean=0.0, d_std=100.0, f_mean=0.0, f_std=100.0)


def test_single_word_token_alignment():
    sample = make_typed_sample("the")
    sample.hold_ms[:] = [100.0, 110.0, 90.0]
    vocab = build_vocab(["the the"], max_subwords=5)
    seq = tokenize_align(sample, vocab, neutral_stats())
    assert seq.subword_ids[0] == CLS_ID
    assert seq.subword_ids[1] == vocab.subword_ids["the"]
    assert len(seq.char_ids[1]) == 3
    assert seq.dwell[1] == [1.0, 1.1, 0.9]
    assert seq.num_content_chars == 3


def test_cls_has_zeroed_temporal_features():
    sample = make_typed_sample("ab")
    vocab = build_vocab(["ab ab"], max_subwords=5)
    seq = tokenize_align(sample, vocab, TimeStats(50.0, 10.0, 5.0, 2.0))
    assert seq.dwell[0] == [0.0] and seq.flight[0] == [0.0]


def test_count_identity():
    text = "the cat the cat sat"
    sample = make_typed_sample(text)
    vocab = build_vocab([text, text], max_subwords=10)
    seq = tokenize_align(sample, vocab, neutral_stats())
    assert seq.num_content_chars == len(sample.events)


@given(st.lists(st.sampled_from(["the cat", "a dog ran", "zy x", "hello hello world"]),
                min_size=1, max_size=4), st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_count_identity_property(texts, seed):
    rng = np.random.default_rng(seed)
    corpus_text = " ".join(texts)
    vocab = build_vocab([corpus_text], max_subwords=20)
    typed = "".join(rng.permutation(list(corpus_text)).tolist())
    sample = make_typed_sample(typed)
    seq = tokenize_align(sample, vocab, neutral_stats())
    assert seq.num_content_chars == len(sample.events)
    # every content char has exactly one (d, f) pair
    for chars, ds, fs in zip(seq.char_ids, seq.dwell, seq.flight):
        assert len(chars) == len(ds) == len(fs)


def test_oov_word_degrades_to_char_tokens():
    vocab = build_vocab(["the the cat cat"], max_subwords=10)
    sample = make_typed_sample("zyx")
    seq = tokenize_align(sample, vocab, neutral_stats())
    # three char-level tokens after [CLS], each with its own timing
    assert seq.num_tokens == 4
    assert all(len(c) == 1 for c in seq.char_ids[1:])
    assert seq.subword_ids[1:] == [UNK_ID] * 3  # 'z','y','x' unseen in corpus
    assert [d for ds in seq.dwell[1:] for d in ds] == [h / 100.0 for h in sample.hold_ms]


def test_whitespace_is_a_token():
    vocab = build_vocab(["ab cd ab cd"], max_subwords=10)
    sample = make_typed_sample("ab cd")
    seq = tokenize_align(sample, vocab, neutral_stats())
    assert seq.subword_ids[2] == vocab.subword_ids[" "]
    assert seq.num_content_chars == 5


# ---------------------------------------------------------------------------
# split


def user_samples(user, n, text="abc"):
    return [make_typed_sample(text, user=user) for _ in range(n)]


def test_split_ratio_ceil():
    samples = user_samples("u0", 10) + user_samples("u1", 4)
    train, test = stratified_split(samples, 0.2, seed=0)
    per_user_test = {u: sum(s.user_id == u for s in test) for u in ("u0", "u1")}
    assert per_user_test["u0"] == 2   # ceil(0.2 * 10)
    assert per_user_test["u1"] == 1   # ceil(0.2 * 4): 4-sample users still split
    assert len(train) + len(test) == 14


def test_split_determinism():
    samples = user_samples("u0", 9) + user_samples("u1", 7)
    a = stratified_split(samples, 0.2, seed=5)
    b = stratified_split(samples, 0.2, seed=5)
    assert [id(s) for s in a[0]] == [id(s) for s in b[0]]
    assert [id(s) for s in a[1]] == [id(s) for s in b[1]]


def test_split_rejects_single_sample_user():
    samples = user_samples("u0", 5) + user_samples("lonely", 1)
    with pytest.raises(SplitError, match="lonely"):
        stratified_split(samples, 0.2, seed=0)


def test_split_dataset_no_leakage_and_roster():
    samples = user_samples("u0", 8, "the cat") + user_samples("u1", 6, "a dog")
    split = split_dataset(samples, test_ratio=0.25, seed=3)
    assert split.users == ["u0", "u1"]
    train_ids = {id(s) for s in split.train_raw}
    test_ids = {id(s) for s in split.test_raw}
    assert not train_ids & test_ids
    assert len(split.train) == len(split.train_raw)
    assert {s.user_id for s in split.train_raw} == {"u0", "u1"}


def test_split_stats_come_from_train_only():
    fast = user_samples("u0", 5, "aa")
    slow = [make_typed_sample("aa", user="u1", hold=500.0) for _ in range(4)]
    split = split_dataset(fast + slow, test_ratio=0.25, seed=0)
    expected = compute_time_stats(split.train_raw)
    assert split.stats == expected
    violation = compute_time_stats(split.train_raw + split.test_raw)
    assert split.stats != violation  # recomputing with test data is detectable


def test_split_hash_stable_and_sensitive():
    samples = user_samples("u0", 6) + user_samples("u1", 6)
    a = split_dataset(samples, seed=1)
    b = split_dataset(samples, seed=1)
    c = split_dataset(samples, seed=2)
    assert a.split_hash == b.split_hash
    assert a.split_hash != c.split_hash
