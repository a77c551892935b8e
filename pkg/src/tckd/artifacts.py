"""Model artifact = TCKPT1 checkpoint carrying weights plus everything needed
to evaluate later: model config, vocabulary, time statistics, user roster, and
the split recipe. Loading verifies consistency and fails loudly on mismatch.
"""

from __future__ import annotations

from .data import (DatasetSplit, TimeStats, Vocabulary, compute_split_hash, stratified_split,
                   tokenize_align)
from .model import DualChannelModel, ModelConfig
from .params import CheckpointError, load_checkpoint, save_checkpoint

ARTIFACT_VERSION = 1


def save_model_artifact(model: DualChannelModel, split: DatasetSplit, path,
                        extra_meta: dict | None = None) -> None:
    meta = {
        "artifact_version": ARTIFACT_VERSION,
        "model_config": model.cfg.to_dict(),
        "vocab": split.vocab.to_dict(),
        "stats": split.stats.to_dict(),
        "users": split.users,
        "split": {"seed": split.seed, "test_ratio": split.test_ratio,
                  "hash": split.split_hash},
    }
    if extra_meta:
        meta["extra"] = extra_meta
    save_checkpoint(model.params, path, meta)


def load_model_artifact(path) -> tuple[DualChannelModel, dict]:
    params, meta = load_checkpoint(path)
    for key in ("model_config", "vocab", "stats", "users", "split"):
        if key not in meta:
            raise CheckpointError(f"{path}: checkpoint metadata lacks {key!r}")
    cfg = ModelConfig.from_dict(meta["model_config"])
    vocab = Vocabulary.from_dict(meta["vocab"])
    if cfg.num_subwords != vocab.num_subwords or cfg.num_chars != vocab.num_chars:
        raise CheckpointError(
            f"{path}: model config vocab sizes ({cfg.num_subwords}, {cfg.num_chars}) do not "
            f"match stored vocabulary ({vocab.num_subwords}, {vocab.num_chars})")
    expected = {f"{p}" for p in params.names()}
    model = DualChannelModel(cfg, params)
    probe = DualChannelModel(cfg, seed=0)
    if set(probe.params.names()) != expected:
        raise CheckpointError(f"{path}: parameter inventory does not match the model config")
    return model, meta


def rebuild_split(meta: dict, samples) -> DatasetSplit:
    """Re-split a dataset with the recipe stored in a checkpoint, tokenizing
    with the stored vocabulary and statistics (never recomputed)."""
    vocab = Vocabulary.from_dict(meta["vocab"])
    stats = TimeStats.from_dict(meta["stats"])
    seed = meta["split"]["seed"]
    test_ratio = meta["split"]["test_ratio"]
    train_raw, test_raw = stratified_split(samples, test_ratio, seed)
    users = sorted({s.user_id for s in train_raw})
    if users != list(meta["users"]):
        raise CheckpointError(
            f"user roster mismatch: dataset has {users}, checkpoint was trained on {meta['users']}")
    split = DatasetSplit(
        users=users,
        user_index={u: i for i, u in enumerate(users)},
        train=[tokenize_align(s, vocab, stats) for s in train_raw],
        test=[tokenize_align(s, vocab, stats) for s in test_raw],
        train_raw=train_raw,
        test_raw=test_raw,
        vocab=vocab,
        stats=stats,
        seed=seed,
        test_ratio=test_ratio,
    )
    split.split_hash = compute_split_hash(train_raw, test_raw, seed, test_ratio)
    return split
