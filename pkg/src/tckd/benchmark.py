"""The standard synthetic benchmark: 8 users typing from one shared phrase
pool with timing-distinct profiles. Content overlaps across users on purpose,
so timing is the only usable signal. Tests, scripts, and the CLI all build the
same pinned dataset from here.
"""

from __future__ import annotations

from .data import DatasetSplit, split_dataset
from .model import DualChannelModel, ModelConfig
from .synth import synth_generate
from .training import TrainConfig, train_model

BENCHMARK_SEED = 1234
BENCHMARK_USERS = 8
BENCHMARK_SAMPLES_PER_USER = 30

BENCHMARK_PHRASES = [
    "the quick brown fox jumps",
    "pack my box with five dozen jugs",
    "how quickly daft zebras jump",
    "a wizard may fix the pylon",
    "typing rhythm is a quiet signature",
    "five big jets flew over the bay",
    "never send a human to do this",
    "the rain in spain stays on the plain",
    "we all type the same words here",
    "keys click under steady hands",
]

BENCHMARK_MODEL = dict(num_layers=2, num_heads=4, hidden_size=64, gru_hidden=64,
                       embed_size=32, max_seq_len=64, dropout_rate=0.0)
BENCHMARK_TRAIN = dict(epochs=8, batch_size=8, learning_rate=1e-3)


def benchmark_samples(seed: int = BENCHMARK_SEED, num_users: int = BENCHMARK_USERS,
                      samples_per_user: int = BENCHMARK_SAMPLES_PER_USER):
    return synth_generate(num_users, samples_per_user, BENCHMARK_PHRASES, seed)


def benchmark_split(seed: int = BENCHMARK_SEED, num_users: int = BENCHMARK_USERS,
                    samples_per_user: int = BENCHMARK_SAMPLES_PER_USER) -> DatasetSplit:
    return split_dataset(benchmark_samples(seed, num_users, samples_per_user),
                         test_ratio=0.2, seed=seed)


def benchmark_model_config(split: DatasetSplit, mode: str) -> ModelConfig:
    return ModelConfig(num_users=split.num_users, num_subwords=split.vocab.num_subwords,
                       num_chars=split.vocab.num_chars, mode=mode, **BENCHMARK_MODEL)


def benchmark_train_config(seed: int = BENCHMARK_SEED) -> TrainConfig:
    return TrainConfig(seed=seed, **BENCHMARK_TRAIN)


def train_benchmark_model(split: DatasetSplit, mode: str,
                          seed: int = BENCHMARK_SEED) -> DualChannelModel:
    model = DualChannelModel(benchmark_model_config(split, mode), seed=seed)
    labels = [split.label(s) for s in split.train]
    train_model(model, split.train, labels, benchmark_train_config(seed))
    return model
