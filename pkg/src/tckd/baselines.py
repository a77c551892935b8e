"""Comparison systems: a Manhattan-distance classifier over summary timing
features, and an LSTM sequence classifier fed raw per-key features or frozen
token embeddings from a trained encoder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import encoder as enc
from .data import DatasetSplit, KeystrokeSample
from .params import ParameterSet, normal_embedding, xavier_uniform, zeros
from .tensor import (Tensor, add, add_bias, concat_cols, constant, embedding, matmul, mul, neg,
                     sigmoid, tanh, vstack)
from .training import TrainConfig, fit

LSTM_PREFIX = "lstm"
LSTM_INPUT_MODES = ("raw_temporal", "charbert_embed", "tempchar_embed")

# summary feature classes for the Manhattan profile
_FEATURE_CLASSES = ("letter", "space", "other")


def _char_class(c: str | None) -> str:
    if c is not None and c.isalpha():
        return "letter"
    if c is not None and c.isspace():
        return "space"
    return "other"


@dataclass
class ManhattanProfile:
    user_id: str
    features: np.ndarray


def manhattan_features(sample: KeystrokeSample) -> np.ndarray:
    """Fixed-length summary: per-class mean hold and flight (letters, space,
    other) plus global mean/std of each."""
    holds = np.asarray(sample.hold_ms, dtype=np.float64)
    flights = np.asarray(sample.flight_ms, dtype=np.float64)
    classes = [_char_class(c) for c in sample.chars]
    feats = []
    for kind in _FEATURE_CLASSES:
        idx = [j for j, k in enumerate(classes) if k == kind]
        feats.append(holds[idx].mean() if idx else 0.0)
    for kind in _FEATURE_CLASSES:
        idx = [j for j, k in enumerate(classes) if k == kind]
        feats.append(flights[idx].mean() if idx else 0.0)
    feats.extend([holds.mean(), holds.std(), flights.mean(), flights.std()])
    return np.asarray(feats)


def build_profiles(train_samples) -> dict[str, ManhattanProfile]:
    by_user: dict[str, list[np.ndarray]] = {}
    for s in train_samples:
        by_user.setdefault(s.user_id, []).append(manhattan_features(s))
    return {u: ManhattanProfile(u, np.mean(v, axis=0)) for u, v in sorted(by_user.items())}


def manhattan_classify(features: np.ndarray, profiles: dict[str, ManhattanProfile]) -> str:
    """argmin L1 distance; ties go to the lexicographically first user."""
    if not profiles:
        raise ValueError("manhattan_classify: no enrolled profiles")
    best_user = None
    best_dist = np.inf
    for user in sorted(profiles):
        p = profiles[user]
        if p.features.shape != features.shape:
            raise ValueError(
                f"feature length mismatch: {features.shape} vs profile {p.features.shape}")
        dist = float(np.abs(features - p.features).sum())
        if dist < best_dist:
            best_user, best_dist = user, dist
    return best_user


def manhattan_scores(features: np.ndarray, profiles: dict[str, ManhattanProfile]) -> dict[str, float]:
    """Similarity per user as negative L1 distance (higher = closer)."""
    return {u: -float(np.abs(features - p.features).sum()) for u, p in sorted(profiles.items())}


def evaluate_manhattan(split: DatasetSplit) -> tuple[float, float]:
    """(identification accuracy, authentication EER) on the test split."""
    from .evaluation import compute_eer

    profiles = build_profiles(split.train_raw)
    correct = 0
    genuine, impostor = [], []
    for s in split.test_raw:
        feats = manhattan_features(s)
        correct += manhattan_classify(feats, profiles) == s.user_id
        for user, score in manhattan_scores(feats, profiles).items():
            (genuine if user == s.user_id else impostor).append(score)
    eer, _ = compute_eer(genuine, impostor)
    return correct / len(split.test_raw), eer


# ---------------------------------------------------------------------------
# LSTM classifier


@dataclass
class LstmConfig:
    input_mode: str
    num_users: int
    hidden_size: int = 64
    embed_size: int = 16  # char embedding width for raw_temporal
    input_size: int = 0   # step width; filled from mode at init

    def __post_init__(self):
        if self.input_mode not in LSTM_INPUT_MODES:
            raise ValueError(f"unknown input_mode {self.input_mode!r}")


def init_lstm_params(cfg: LstmConfig, num_chars: int, embed_width: int,
                     rng: np.random.Generator) -> ParameterSet:
    """embed_width is 2H of the source encoder (embed modes) and ignored for raw."""
    params = ParameterSet()
    if cfg.input_mode == "raw_temporal":
        params.add(f"{LSTM_PREFIX}.char_embed", normal_embedding(rng, num_chars, cfg.embed_size))
        cfg.input_size = cfg.embed_size + 2
    else:
        cfg.input_size = embed_width
    for gate in ("i", "f", "o", "g"):
        params.add(f"{LSTM_PREFIX}.w_{gate}", xavier_uniform(rng, cfg.input_size, cfg.hidden_size))
        params.add(f"{LSTM_PREFIX}.u_{gate}", xavier_uniform(rng, cfg.hidden_size, cfg.hidden_size))
        params.add(f"{LSTM_PREFIX}.b_{gate}", zeros(1, cfg.hidden_size))
    params.add(f"{LSTM_PREFIX}.head_w", xavier_uniform(rng, cfg.hidden_size, cfg.num_users))
    params.add(f"{LSTM_PREFIX}.head_b", zeros(1, cfg.num_users))
    return params


def lstm_cell(x: Tensor, h: Tensor, c: Tensor, params: ParameterSet) -> tuple[Tensor, Tensor]:
    """Standard gates: c' = f*c + i*g, h' = o*tanh(c')."""

    def gate(name, act):
        return act(add_bias(add(matmul(x, params[f"{LSTM_PREFIX}.w_{name}"]),
                                matmul(h, params[f"{LSTM_PREFIX}.u_{name}"])),
                            params[f"{LSTM_PREFIX}.b_{name}"]))

    i = gate("i", sigmoid)
    f = gate("f", sigmoid)
    o = gate("o", sigmoid)
    g = gate("g", tanh)
    c_next = add(mul(f, c), mul(i, g))
    return mul(o, tanh(c_next)), c_next


def lstm_forward(steps: list[Tensor], params: ParameterSet, hidden_size: int) -> Tensor:
    """Run the recurrence over [1 x input_size] steps; logits from the final state."""
    if not steps:
        raise ValueError("lstm_forward: empty sequence")
    h = constant(np.zeros((1, hidden_size)))
    c = constant(np.zeros((1, hidden_size)))
    for x in steps:
        if x.shape[1] != params[f"{LSTM_PREFIX}.w_i"].shape[0]:
            raise ValueError(
                f"step width {x.shape[1]} != lstm input size {params[f'{LSTM_PREFIX}.w_i'].shape[0]}")
        h, c = lstm_cell(x, h, c, params)
    return add_bias(matmul(h, params[f"{LSTM_PREFIX}.head_w"]), params[f"{LSTM_PREFIX}.head_b"])


class LstmClassifier:
    """LSTM over per-sample step sequences; sequences are precomputed per input mode."""

    def __init__(self, cfg: LstmConfig, num_chars: int, embed_width: int, seed: int):
        self.cfg = cfg
        rng = np.random.default_rng([seed, 0x157])
        self.params = init_lstm_params(cfg, num_chars, embed_width, rng)

    def _raw_steps(self, seq) -> list[Tensor]:
        steps = []
        table = self.params[f"{LSTM_PREFIX}.char_embed"]
        for chars, ds, fs in zip(seq.char_ids[1:], seq.dwell[1:], seq.flight[1:]):
            for c, d, f in zip(chars, ds, fs):
                emb = embedding(table, np.asarray([c]))
                steps.append(concat_cols([emb, constant([[d, f]])]))
        return steps

    def steps_for(self, seq, frozen_embedding: np.ndarray | None = None) -> list:
        if self.cfg.input_mode == "raw_temporal":
            return self._raw_steps(seq)
        if frozen_embedding is None:
            raise ValueError(f"input_mode {self.cfg.input_mode} needs precomputed embeddings")
        return [constant(frozen_embedding[j:j + 1]) for j in range(frozen_embedding.shape[0])]

    def logits(self, seq, frozen_embedding=None) -> Tensor:
        return lstm_forward(self.steps_for(seq, frozen_embedding), self.params,
                            self.cfg.hidden_size)


def frozen_token_embeddings(model, seqs, use_temporal: bool) -> list[np.ndarray]:
    """Per-sample [m x 2H] encoder outputs with gradients detached; the frozen
    feature inputs for the embed-mode LSTM rows."""
    out = []
    for seq in seqs:
        tokens = enc.sequence_tokens(seq)
        encoded = enc.encode_tokens(tokens, model.params, model.cfg.gru_hidden,
                                    use_temporal=use_temporal,
                                    temporal_mode=model.cfg.temporal_mode)
        out.append(encoded.data.copy())
    return out


def train_lstm(classifier: LstmClassifier, seqs, labels, cfg: TrainConfig,
               frozen: list[np.ndarray] | None = None) -> list[float]:
    frozen_by_id = None if frozen is None else {id(s): e for s, e in zip(seqs, frozen)}

    def logits_fn(batch, rng):
        rows = []
        for s in batch:
            emb = None if frozen_by_id is None else frozen_by_id[id(s)]
            rows.append(classifier.logits(s, emb))
        return vstack(rows)

    return fit(classifier.params, logits_fn, seqs, labels, cfg)


def evaluate_lstm(classifier: LstmClassifier, seqs, labels,
                  frozen: list[np.ndarray] | None = None) -> float:
    correct = 0
    for j, s in enumerate(seqs):
        emb = None if frozen is None else frozen[j]
        pred = int(np.argmax(classifier.logits(s, emb).data[0]))
        correct += pred == labels[j]
    return correct / len(seqs)


# ---------------------------------------------------------------------------
# comparative suite

BASELINE_ROWS = ("temp_char", "char_only", "manhattan", "lstm_raw",
                 "lstm_charbert_embed", "lstm_tempchar_embed")


def run_baseline_suite(split: DatasetSplit, rows, seed: int,
                       models: dict | None = None,
                       model_config: dict | None = None,
                       train_config: TrainConfig | None = None,
                       lstm_hidden: int = 64) -> dict:
    """One comparative report over a single pinned split.

    models may carry pre-trained DualChannelModels under keys "temp_char" /
    "char_only"; rows needing a model that is neither supplied nor trainable
    from the given configs raise ValueError.
    """
    from .evaluation import evaluate_authentication, evaluate_identification
    from .model import DualChannelModel, ModelConfig
    from .training import train_model

    rows = list(rows)
    unknown = [r for r in rows if r not in BASELINE_ROWS]
    if unknown:
        raise ValueError(f"unknown baseline rows {unknown}; expected {BASELINE_ROWS}")
    models = dict(models or {})
    tcfg = train_config or TrainConfig(seed=seed)
    labels_train = [split.label(s) for s in split.train]
    labels_test = [split.label(s) for s in split.test]

    def need_model(mode: str) -> "DualChannelModel":
        if mode in models:
            return models[mode]
        if model_config is None:
            raise ValueError(f"row needs a trained {mode} model and no model_config was given")
        cfg = ModelConfig(num_users=split.num_users, num_subwords=split.vocab.num_subwords,
                          num_chars=split.vocab.num_chars, mode=mode, **model_config)
        model = DualChannelModel(cfg, seed=seed)
        train_model(model, split.train, labels_train, tcfg)
        models[mode] = model
        return model

    report_rows: dict[str, dict] = {}
    for name in rows:
        if name in ("temp_char", "char_only"):
            model = need_model(name)
            ident = evaluate_identification(model, split.test, split.user_index)
            auth = evaluate_authentication(model, split)
            report_rows[name] = {"accuracy": ident.accuracy, "eer": auth.eer}
        elif name == "manhattan":
            acc, eer = evaluate_manhattan(split)
            report_rows[name] = {"accuracy": acc, "eer": eer}
        else:
            if name == "lstm_raw":
                mode = "raw_temporal"
                frozen_train = frozen_test = None
                embed_width = 0
            else:
                mode = "charbert_embed" if name == "lstm_charbert_embed" else "tempchar_embed"
                source = need_model("char_only" if mode == "charbert_embed" else "temp_char")
                use_temporal = mode == "tempchar_embed"
                frozen_train = frozen_token_embeddings(source, split.train, use_temporal)
                frozen_test = frozen_token_embeddings(source, split.test, use_temporal)
                embed_width = source.cfg.char_width
            lstm_cfg = LstmConfig(input_mode=mode, num_users=split.num_users,
                                  hidden_size=lstm_hidden)
            clf = LstmClassifier(lstm_cfg, split.vocab.num_chars, embed_width, seed)
            train_lstm(clf, split.train, labels_train, tcfg, frozen_train)
            acc = evaluate_lstm(clf, split.test, labels_test, frozen_test)
            report_rows[name] = {"accuracy": acc, "eer": None}

    return {"split_hash": split.split_hash, "seed": seed, "rows": report_rows}
