"""Seeded mini-batch training shared by the main model, the LSTM baseline, and
federated clients.

Seed streams are derived as default_rng([seed, salt, index...]) so that a
federated client resuming at epoch_offset k replays exactly the batch order a
centralized run would use at global epoch k. That is what makes the
single-client federated degenerate case bit-identical to centralized training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .optim import AdamState, adam_step, init_adam
from .params import ParameterSet
from .tensor import backward, cross_entropy

SALT_SHUFFLE = 0x1A5
SALT_DROPOUT = 0xD409


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""


@dataclass
class TrainConfig:
    epochs: int = 5
    batch_size: int = 8
    learning_rate: float = 5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "batch_size": self.batch_size,
                "learning_rate": self.learning_rate, "beta1": self.beta1,
                "beta2": self.beta2, "epsilon": self.epsilon, "seed": self.seed}


def fit(params: ParameterSet, logits_fn, samples, labels, cfg: TrainConfig,
        epochs: int | None = None, epoch_offset: int = 0,
        adam: AdamState | None = None) -> list[float]:
    """Cross-entropy training; returns mean per-sample loss for each epoch.

    logits_fn(batch_samples, rng) must return a [B x num_classes] Tensor wired
    to `params`. rng is the per-batch dropout stream (or None when dropout is
    not wanted by the caller's model).
    """
    if not samples:
        raise ValueError("fit: empty training set")
    if len(samples) != len(labels):
        raise ValueError(f"fit: {len(samples)} samples vs {len(labels)} labels")
    if adam is None:
        adam = init_adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    n = len(samples)
    labels = np.asarray(labels, dtype=np.intp)
    epoch_losses: list[float] = []
    total_epochs = cfg.epochs if epochs is None else epochs
    for local_epoch in range(total_epochs):
        epoch = epoch_offset + local_epoch
        order = np.random.default_rng([cfg.seed, SALT_SHUFFLE, epoch]).permutation(n)
        total_nll = 0.0
        for b, start in enumerate(range(0, n, cfg.batch_size)):
            idx = order[start:start + cfg.batch_size]
            batch = [samples[i] for i in idx]
            rng = np.random.default_rng([cfg.seed, SALT_DROPOUT, epoch, b])
            logits = logits_fn(batch, rng)
            loss = cross_entropy(logits, labels[idx])
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(f"non-finite loss {value} at epoch {epoch} batch {b}")
            total_nll += value * len(idx)
            backward(loss)
            params.fill_missing_grads()
            adam_step(params, adam)
        epoch_losses.append(total_nll / n)
    return epoch_losses


def train_model(model, seqs, labels, cfg: TrainConfig, epochs: int | None = None,
                epoch_offset: int = 0, adam: AdamState | None = None) -> list[float]:
    """fit() wired to a DualChannelModel with dropout active."""

    def logits_fn(batch, rng):
        return model.logits_batch(batch, train=True, rng=rng)

    return fit(model.params, logits_fn, seqs, labels, cfg,
               epochs=epochs, epoch_offset=epoch_offset, adam=adam)
