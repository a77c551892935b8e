"""Keystroke data layer: time derivation, CSV ingestion, tokenization, splits.

Two CSV schemas are supported. `precomputed` carries hold/flight directly,
`timestamps` carries press/release and the times are derived on load:

    user_id,key_code,hold_ms,flight_ms,char[,session_id]
    user_id,key_code,press_ms,release_ms,char[,session_id]

Rows group into one sample per (user_id, session_id); without a session
column, a blank line starts a new session.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

SALT_SPLIT = 0x5911

PAD_ID = 0
UNK_ID = 1
CLS_ID = 2
SPECIAL_SUBWORDS = ("[PAD]", "[UNK]", "[CLS]")
SPECIAL_CHARS = ("\x00pad", "\x00unk", "\x00cls")

FLIGHT_MODES = ("release_to_press", "press_to_press")

PRECOMPUTED_COLUMNS = ("user_id", "key_code", "hold_ms", "flight_ms", "char")
TIMESTAMPS_COLUMNS = ("user_id", "key_code", "press_ms", "release_ms", "char")


class MalformedEventError(ValueError):
    """A keystroke event violates release >= press."""


class DataFormatError(ValueError):
    """Unknown schema, non-numeric time, or empty file."""


class SplitError(ValueError):
    """A user cannot satisfy the split preconditions."""


@dataclass(frozen=True)
class KeystrokeEvent:
    key_code: int
    char: str | None
    press_ms: float
    release_ms: float


@dataclass
class KeystrokeSample:
    """One typing session: raw events plus derived per-key hold/flight times."""

    user_id: str
    events: list[KeystrokeEvent]
    hold_ms: list[float]
    flight_ms: list[float]
    session_id: str = "s000"

    @property
    def chars(self) -> list[str | None]:
        return [e.char for e in self.events]

    def text(self) -> str:
        return "".join(c if c is not None else "\x00" for c in self.chars)

    def __eq__(self, other) -> bool:
        # biometric identity: ids, keys, chars, derived times (timestamps may be shifted)
        if not isinstance(other, KeystrokeSample):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.session_id == other.session_id
            and [e.key_code for e in self.events] == [e.key_code for e in other.events]
            and self.chars == other.chars
            and self.hold_ms == other.hold_ms
            and self.flight_ms == other.flight_ms
        )


def derive_times(events: list[KeystrokeEvent], flight_mode: str = "release_to_press"):
    """Hold = release - press; flight = gap to the previous key, 0 for the first.

    release_to_press flight may be negative when keys overlap; that signal is
    kept, not clamped.
    """
    if flight_mode not in FLIGHT_MODES:
        raise ValueError(f"unknown flight_mode {flight_mode!r}, expected one of {FLIGHT_MODES}")
    holds: list[float] = []
    flights: list[float] = []
    for j, e in enumerate(events):
        if e.release_ms < e.press_ms:
            raise MalformedEventError(
                f"event {j} (key_code={e.key_code}): release {e.release_ms} < press {e.press_ms}")
        holds.append(e.release_ms - e.press_ms)
        if j == 0:
            flights.append(0.0)
        elif flight_mode == "release_to_press":
            flights.append(e.press_ms - events[j - 1].release_ms)
        else:
            flights.append(e.press_ms - events[j - 1].press_ms)
    return holds, flights


def make_sample(user_id: str, events: list[KeystrokeEvent], session_id: str = "s000",
                flight_mode: str = "release_to_press") -> KeystrokeSample:
    holds, flights = derive_times(events, flight_mode)
    return KeystrokeSample(user_id, list(events), holds, flights, session_id)


# ---------------------------------------------------------------------------
# CSV parsing and writing


def _rebuild_events(key_codes, chars, holds, flights):
    """Synthesize consistent press/release timestamps from hold/flight lists."""
    events = []
    press = 0.0
    release = 0.0
    for j, (k, c, h, f) in enumerate(zip(key_codes, chars, holds, flights)):
        if h < 0:
            raise MalformedEventError(f"event {j} (key_code={k}): negative hold {h}")
        press = 0.0 if j == 0 else release + f
        press = max(press, 0.0)
        release = press + h
        events.append(KeystrokeEvent(k, c, press, release))
    return events


def _parse_float(text: str, path, line_no: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise DataFormatError(f"{path}:{line_no}: non-numeric {column} {text!r}") from exc
    if math.isnan(value) or math.isinf(value):
        raise DataFormatError(f"{path}:{line_no}: non-finite {column} {text!r}")
    return value


def parse_dataset(path, fmt: str, flight_mode: str = "release_to_press") -> list[KeystrokeSample]:
    """Read one of the two schemas into per-(user, session) samples, in file order."""
    if fmt not in ("precomputed", "timestamps"):
        raise DataFormatError(f"unknown dataset format {fmt!r}")
    expected = PRECOMPUTED_COLUMNS if fmt == "precomputed" else TIMESTAMPS_COLUMNS
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    header = tuple(rows[0])
    has_session = header == expected + ("session_id",)
    if not has_session and header != expected:
        raise DataFormatError(
            f"{path}: header {header} does not match the {fmt} schema {expected}"
            " (optionally + session_id)")

    groups: dict[tuple[str, str], dict] = {}
    order: list[tuple[str, str]] = []
    anon_session = 0
    for line_no, row_values in enumerate(rows[1:], start=2):
        if not row_values or all(not c for c in row_values):
            anon_session += 1  # blank line: next rows belong to a new session
            continue
        if len(row_values) != len(header):
            raise DataFormatError(f"{path}:{line_no}: expected {len(header)} columns, got {len(row_values)}")
        user_id = row_values[0]
        try:
            key_code = int(row_values[1])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{line_no}: non-integer key_code {row_values[1]!r}") from exc
        t1 = _parse_float(row_values[2], path, line_no, expected[2])
        t2 = _parse_float(row_values[3], path, line_no, expected[3])
        char = row_values[4] if row_values[4] != "" else None
        session = row_values[5] if has_session else f"s{anon_session:03d}"
        key = (user_id, session)
        if key not in groups:
            groups[key] = {"key_codes": [], "chars": [], "a": [], "b": []}
            order.append(key)
        g = groups[key]
        g["key_codes"].append(key_code)
        g["chars"].append(char)
        g["a"].append(t1)
        g["b"].append(t2)

    samples = []
    for user_id, session in order:
        g = groups[(user_id, session)]
        if fmt == "timestamps":
            events = [KeystrokeEvent(k, c, p, r)
                      for k, c, p, r in zip(g["key_codes"], g["chars"], g["a"], g["b"])]
            samples.append(make_sample(user_id, events, session, flight_mode))
        else:
            events = _rebuild_events(g["key_codes"], g["chars"], g["a"], g["b"])
            samples.append(KeystrokeSample(user_id, events, list(g["a"]), list(g["b"]), session))
    return samples


def write_dataset(samples: list[KeystrokeSample], path, fmt: str) -> None:
    if fmt not in ("precomputed", "timestamps"):
        raise DataFormatError(f"unknown dataset format {fmt!r}")
    expected = PRECOMPUTED_COLUMNS if fmt == "precomputed" else TIMESTAMPS_COLUMNS
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(expected) + ["session_id"])
        for s in samples:
            for j, e in enumerate(s.events):
                char = e.char if e.char is not None else ""
                if fmt == "precomputed":
                    writer.writerow([s.user_id, e.key_code, repr(s.hold_ms[j]),
                                     repr(s.flight_ms[j]), char, s.session_id])
                else:
                    writer.writerow([s.user_id, e.key_code, repr(e.press_ms),
                                     repr(e.release_ms), char, s.session_id])


# ---------------------------------------------------------------------------
# vocabulary


@dataclass
class Vocabulary:
    """Subword inventory (greedy longest-match units) plus a character id map."""

    subword_ids: dict[str, int]
    char_ids: dict[str, int]
    max_unit_len: int = 1

    @property
    def num_subwords(self) -> int:
        return len(self.subword_ids)

    @property
    def num_chars(self) -> int:
        return len(self.char_ids)

    def subword_id(self, unit: str) -> int:
        return self.subword_ids.get(unit, UNK_ID)

    def char_id(self, c: str) -> int:
        return self.char_ids.get(c, UNK_ID)

    def to_dict(self) -> dict:
        return {"subword_ids": self.subword_ids, "char_ids": self.char_ids,
                "max_unit_len": self.max_unit_len}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(dict(d["subword_ids"]), dict(d["char_ids"]), int(d["max_unit_len"]))


def build_vocab(corpus: list[str], max_subwords: int) -> Vocabulary:
    """Frequency-built word inventory with single-character fallback units.

    Units are whitespace-delimited words seen at least twice (capped at
    max_subwords, most frequent first), plus every distinct character.
    """
    texts = [t for t in corpus if t]
    if not texts:
        raise DataFormatError("build_vocab: empty corpus")
    freq: dict[str, int] = {}
    chars: set[str] = set()
    for text in texts:
        chars.update(text)
        for word in text.split():
            if len(word) > 1:
                freq[word] = freq.get(word, 0) + 1
    words = sorted((w for w, n in freq.items() if n >= 2), key=lambda w: (-freq[w], w))
    words = words[:max_subwords]

    subword_ids = {tok: i for i, tok in enumerate(SPECIAL_SUBWORDS)}
    for w in words:
        subword_ids[w] = len(subword_ids)
    for c in sorted(chars):
        if c not in subword_ids:
            subword_ids[c] = len(subword_ids)
    char_ids = {c: i for i, c in enumerate(SPECIAL_CHARS)}
    for c in sorted(chars):
        char_ids[c] = len(char_ids)
    max_len = max((len(w) for w in words), default=1)
    return Vocabulary(subword_ids, char_ids, max_len)


def greedy_segment(text: str, vocab: Vocabulary) -> list[str]:
    """Greedy longest-match over the character stream; never fails, single
    characters (known or not) are the fallback unit."""
    units = []
    i = 0
    n = len(text)
    while i < n:
        match = text[i]
        for length in range(min(vocab.max_unit_len, n - i), 1, -1):
            cand = text[i:i + length]
            if cand in vocab.subword_ids:
                match = cand
                break
        units.append(match)
        i += len(match)
    return units


# ---------------------------------------------------------------------------
# temporal normalization


@dataclass(frozen=True)
class TimeStats:
    """Per-feature mean/std of the train split, in milliseconds."""

    d_mean: float
    d_std: float
    f_mean: float
    f_std: float

    def to_dict(self) -> dict:
        return {"d_mean": self.d_mean, "d_std": self.d_std,
                "f_mean": self.f_mean, "f_std": self.f_std}

    @classmethod
    def from_dict(cls, d: dict) -> "TimeStats":
        return cls(d["d_mean"], d["d_std"], d["f_mean"], d["f_std"])


def compute_time_stats(samples: list[KeystrokeSample]) -> TimeStats:
    holds = np.concatenate([np.asarray(s.hold_ms, dtype=np.float64) for s in samples])
    flights = np.concatenate([np.asarray(s.flight_ms, dtype=np.float64) for s in samples])
    return TimeStats(float(holds.mean()), float(holds.std()),
                     float(flights.mean()), float(flights.std()))


NORMALIZED_CLIP = 5.0


def normalize_times(d_ms, f_ms, stats: TimeStats):
    """Z-score with train statistics, clipped to [-5, 5]; zero std falls back
    to centering only."""
    d_scale = stats.d_std if stats.d_std > 0 else 1.0
    f_scale = stats.f_std if stats.f_std > 0 else 1.0
    d = np.clip((np.asarray(d_ms, dtype=np.float64) - stats.d_mean) / d_scale,
                -NORMALIZED_CLIP, NORMALIZED_CLIP)
    f = np.clip((np.asarray(f_ms, dtype=np.float64) - stats.f_mean) / f_scale,
                -NORMALIZED_CLIP, NORMALIZED_CLIP)
    return d.tolist(), f.tolist()


# ---------------------------------------------------------------------------
# tokenization with temporal alignment


@dataclass
class TokenizedSequence:
    """Subword ids plus per-subword character ids and aligned (d, f) features.

    Token 0 is always [CLS] with a single pseudo-char and zeroed features;
    every content character carries exactly one (d, f) pair.
    """

    user_id: str
    subword_ids: list[int]
    char_ids: list[list[int]]
    dwell: list[list[float]]
    flight: list[list[float]]

    @property
    def num_tokens(self) -> int:
        return len(self.subword_ids)

    @property
    def num_content_chars(self) -> int:
        # the prepended [CLS] pseudo-char is not typed content
        return sum(len(c) for c in self.char_ids[1:])

    def truncated(self, max_tokens: int) -> "TokenizedSequence":
        return TokenizedSequence(self.user_id, self.subword_ids[:max_tokens],
                                 self.char_ids[:max_tokens], self.dwell[:max_tokens],
                                 self.flight[:max_tokens])

    def to_dict(self) -> dict:
        return {"user_id": self.user_id, "subword_ids": self.subword_ids,
                "char_ids": self.char_ids, "dwell": self.dwell, "flight": self.flight}

    @classmethod
    def from_dict(cls, d: dict) -> "TokenizedSequence":
        return cls(d["user_id"], list(d["subword_ids"]), [list(x) for x in d["char_ids"]],
                   [list(x) for x in d["dwell"]], [list(x) for x in d["flight"]])


def tokenize_align(sample: KeystrokeSample, vocab: Vocabulary,
                   stats: TimeStats) -> TokenizedSequence:
    """Segment the typed stream into subwords and align normalized (d, f)
    to every character. Whitespace keys stay as their own tokens so their
    timing survives."""
    text = sample.text()
    d_norm, f_norm = normalize_times(sample.hold_ms, sample.flight_ms, stats)
    units = greedy_segment(text, vocab)

    subword_ids = [CLS_ID]
    char_ids: list[list[int]] = [[CLS_ID]]
    dwell: list[list[float]] = [[0.0]]
    flight: list[list[float]] = [[0.0]]
    pos = 0
    for unit in units:
        k = len(unit)
        subword_ids.append(vocab.subword_id(unit))
        char_ids.append([vocab.char_id(c) for c in unit])
        dwell.append(d_norm[pos:pos + k])
        flight.append(f_norm[pos:pos + k])
        pos += k
    assert pos == len(text)
    return TokenizedSequence(sample.user_id, subword_ids, char_ids, dwell, flight)


# ---------------------------------------------------------------------------
# dataset split


@dataclass
class DatasetSplit:
    """Per-user stratified train/test split, tokenized with train-only stats."""

    users: list[str]
    user_index: dict[str, int]
    train: list[TokenizedSequence]
    test: list[TokenizedSequence]
    train_raw: list[KeystrokeSample]
    test_raw: list[KeystrokeSample]
    vocab: Vocabulary
    stats: TimeStats
    seed: int
    test_ratio: float
    split_hash: str = ""

    @property
    def num_users(self) -> int:
        return len(self.users)

    def label(self, seq: TokenizedSequence) -> int:
        return self.user_index[seq.user_id]


def _sample_digest(sample: KeystrokeSample) -> str:
    payload = json.dumps(
        [sample.user_id, sample.session_id, [e.key_code for e in sample.events],
         sample.chars, [repr(x) for x in sample.hold_ms], [repr(x) for x in sample.flight_ms]],
        sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def compute_split_hash(train_raw, test_raw, seed: int, test_ratio: float) -> str:
    payload = json.dumps({
        "seed": seed,
        "test_ratio": test_ratio,
        "train": [_sample_digest(s) for s in train_raw],
        "test": [_sample_digest(s) for s in test_raw],
    }, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def stratified_split(samples: list[KeystrokeSample], test_ratio: float, seed: int):
    """ceil(test_ratio * n) samples of every user go to test, deterministically."""
    by_user: dict[str, list[int]] = {}
    for i, s in enumerate(samples):
        by_user.setdefault(s.user_id, []).append(i)
    rng = np.random.default_rng([seed, SALT_SPLIT])
    test_idx: set[int] = set()
    for user in sorted(by_user):
        idx = by_user[user]
        if len(idx) < 2:
            raise SplitError(f"user {user} has {len(idx)} sample(s); need at least 2 to split")
        k = math.ceil(test_ratio * len(idx))
        chosen = rng.permutation(len(idx))[:k]
        test_idx.update(idx[c] for c in chosen)
    train = [s for i, s in enumerate(samples) if i not in test_idx]
    test = [s for i, s in enumerate(samples) if i in test_idx]
    return train, test


def split_dataset(samples: list[KeystrokeSample], test_ratio: float = 0.2, seed: int = 0,
                  max_subwords: int = 512) -> DatasetSplit:
    """Split, then build vocabulary and time statistics on the train side only,
    and tokenize both sides with them."""
    train_raw, test_raw = stratified_split(samples, test_ratio, seed)
    vocab = build_vocab([s.text() for s in train_raw], max_subwords)
    stats = compute_time_stats(train_raw)
    train = [tokenize_align(s, vocab, stats) for s in train_raw]
    test = [tokenize_align(s, vocab, stats) for s in test_raw]
    users = sorted({s.user_id for s in train_raw})
    split = DatasetSplit(
        users=users,
        user_index={u: i for i, u in enumerate(users)},
        train=train,
        test=test,
        train_raw=train_raw,
        test_raw=test_raw,
        vocab=vocab,
        stats=stats,
        seed=seed,
        test_ratio=test_ratio,
    )
    split.split_hash = compute_split_hash(train_raw, test_raw, seed, test_ratio)
    return split
