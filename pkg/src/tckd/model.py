"""Dual-channel sequence model: a subword token channel and a temporal-character
channel run through per-channel transformer layers, re-mixed after every layer
by a fuse-and-split interaction module. Pooled output is the token channel's
[CLS] row; a linear head gives per-user logits.

char_only mode keeps the identical architecture and simply withholds the
timing features from the character encoder, so the two modes are directly
comparable.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np

from . import encoder as enc
from .data import CLS_ID, PAD_ID, TokenizedSequence
from .params import ParameterSet, normal_embedding, ones, xavier_uniform, zeros
from .tensor import (Tensor, add, add_bias, concat_cols, constant, embedding, gelu, layer_norm,
                     matmul, mul, mul_rows, row, slice_cols, slice_rows, softmax, transpose,
                     vstack)

MODEL_PREFIX = "model"
MODES = ("char_only", "temp_char")
ATTENTION_MASK_FILL = -1e30


class TruncationWarning(UserWarning):
    """A sequence exceeded max_seq_len and was truncated."""


@dataclass
class ModelConfig:
    num_users: int
    num_subwords: int
    num_chars: int
    num_layers: int = 2
    num_heads: int = 4
    hidden_size: int = 64      # token-channel width D
    gru_hidden: int = 64       # H; the char channel enters at width 2H
    embed_size: int = 32       # E, character/temporal embedding width
    max_seq_len: int = 128
    dropout_rate: float = 0.1
    mode: str = "temp_char"
    temporal_mode: str = "separate"

    def __post_init__(self):
        if self.hidden_size % self.num_heads != 0:
            raise ValueError(
                f"hidden_size {self.hidden_size} not divisible by num_heads {self.num_heads}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.temporal_mode not in enc.TEMPORAL_MODES:
            raise ValueError(f"unknown temporal_mode {self.temporal_mode!r}")

    @property
    def char_width(self) -> int:
        return 2 * self.gru_hidden

    @property
    def head_dim(self) -> int:
        return self.hidden_size // self.num_heads

    @property
    def ffn_size(self) -> int:
        return 4 * self.hidden_size

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def _init_channel_layer(params: ParameterSet, rng, base: str, d: int, ffn: int) -> None:
    for name in ("attn_q", "attn_k", "attn_v", "attn_o"):
        params.add(f"{base}.{name}_w", xavier_uniform(rng, d, d))
        params.add(f"{base}.{name}_b", zeros(1, d))
    params.add(f"{base}.ln1_gain", ones(1, d))
    params.add(f"{base}.ln1_bias", zeros(1, d))
    params.add(f"{base}.ln2_gain", ones(1, d))
    params.add(f"{base}.ln2_bias", zeros(1, d))
    params.add(f"{base}.ffn_w1", xavier_uniform(rng, d, ffn))
    params.add(f"{base}.ffn_b1", zeros(1, ffn))
    params.add(f"{base}.ffn_w2", xavier_uniform(rng, ffn, d))
    params.add(f"{base}.ffn_b2", zeros(1, d))


def init_model_params(cfg: ModelConfig, rng: np.random.Generator) -> ParameterSet:
    params = ParameterSet()
    enc.init_encoder_params(params, rng, cfg.num_chars, cfg.embed_size, cfg.gru_hidden,
                            cfg.temporal_mode)
    d = cfg.hidden_size
    params.add(f"{MODEL_PREFIX}.subword_embed", normal_embedding(rng, cfg.num_subwords, d))
    params.add(f"{MODEL_PREFIX}.pos_embed", normal_embedding(rng, cfg.max_seq_len, d))
    params.add(f"{MODEL_PREFIX}.embed_ln_gain", ones(1, d))
    params.add(f"{MODEL_PREFIX}.embed_ln_bias", zeros(1, d))
    params.add(f"{MODEL_PREFIX}.char_proj_w", xavier_uniform(rng, cfg.char_width, d))
    params.add(f"{MODEL_PREFIX}.char_proj_b", zeros(1, d))
    for layer in range(cfg.num_layers):
        for channel in ("tok", "char"):
            _init_channel_layer(params, rng, f"{MODEL_PREFIX}.layer{layer}.{channel}", d,
                                cfg.ffn_size)
        inter = f"{MODEL_PREFIX}.layer{layer}.inter"
        params.add(f"{inter}.fuse_w", xavier_uniform(rng, 2 * d, d))
        params.add(f"{inter}.split_tok_w", xavier_uniform(rng, d, d))
        params.add(f"{inter}.split_char_w", xavier_uniform(rng, d, d))
    params.add(f"{MODEL_PREFIX}.head_w", xavier_uniform(rng, d, cfg.num_users))
    params.add(f"{MODEL_PREFIX}.head_b", zeros(1, cfg.num_users))
    return params


def _ln(x: Tensor, params: ParameterSet, base: str) -> Tensor:
    return add_bias(mul_rows(layer_norm(x), params[f"{base}_gain"]), params[f"{base}_bias"])


def attention(x_norm: Tensor, params: ParameterSet, base: str, num_heads: int,
              mask_add: np.ndarray | None = None) -> Tensor:
    """Multi-head self-attention over [m x D]; mask_add is an additive [m x m]
    matrix (ATTENTION_MASK_FILL on blocked key columns)."""
    m, d = x_norm.shape
    head_dim = d // num_heads
    scale = 1.0 / np.sqrt(head_dim)
    q = add_bias(matmul(x_norm, params[f"{base}.attn_q_w"]), params[f"{base}.attn_q_b"])
    k = add_bias(matmul(x_norm, params[f"{base}.attn_k_w"]), params[f"{base}.attn_k_b"])
    v = add_bias(matmul(x_norm, params[f"{base}.attn_v_w"]), params[f"{base}.attn_v_b"])
    heads = []
    for h in range(num_heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        scores = mul(matmul(slice_cols(q, lo, hi), transpose(slice_cols(k, lo, hi))), scale)
        if mask_add is not None:
            scores = add(scores, constant(mask_add))
        heads.append(matmul(softmax(scores), slice_cols(v, lo, hi)))
    return add_bias(matmul(concat_cols(heads), params[f"{base}.attn_o_w"]),
                    params[f"{base}.attn_o_b"])


def transformer_block(x: Tensor, params: ParameterSet, base: str, num_heads: int,
                      mask_add: np.ndarray | None = None,
                      dropout=None) -> Tensor:
    """Pre-norm attention + residual, then pre-norm GELU feed-forward + residual."""
    attn_out = attention(_ln(x, params, f"{base}.ln1"), params, base, num_heads, mask_add)
    if dropout is not None:
        attn_out = dropout(attn_out)
    x = add(x, attn_out)
    h = gelu(add_bias(matmul(_ln(x, params, f"{base}.ln2"), params[f"{base}.ffn_w1"]),
                      params[f"{base}.ffn_b1"]))
    ffn_out = add_bias(matmul(h, params[f"{base}.ffn_w2"]), params[f"{base}.ffn_b2"])
    if dropout is not None:
        ffn_out = dropout(ffn_out)
    return add(x, ffn_out)


def heterogeneous_interaction(tok: Tensor, char: Tensor, params: ParameterSet,
                              base: str) -> tuple[Tensor, Tensor]:
    """Fuse both streams into a shared representation, then split it back with
    distinct residual projections."""
    if tok.shape[0] != char.shape[0]:
        raise ValueError(f"stream length mismatch: {tok.shape} vs {char.shape}")
    s = gelu(matmul(concat_cols([tok, char]), params[f"{base}.fuse_w"]))
    tok_out = add(tok, matmul(s, params[f"{base}.split_tok_w"]))
    char_out = add(char, matmul(s, params[f"{base}.split_char_w"]))
    return tok_out, char_out


def token_channel_embed(subword_ids, params: ParameterSet, max_seq_len: int) -> Tensor:
    """Subword + learned positional embedding, layer-normed. Truncates with a
    warning, never silently."""
    ids = np.asarray(subword_ids, dtype=np.intp)
    if len(ids) > max_seq_len:
        warnings.warn(f"sequence of {len(ids)} tokens truncated to {max_seq_len}",
                      TruncationWarning, stacklevel=2)
        ids = ids[:max_seq_len]
    tok = embedding(params[f"{MODEL_PREFIX}.subword_embed"], ids)
    pos = slice_rows(params[f"{MODEL_PREFIX}.pos_embed"], 0, len(ids))
    return _ln(add(tok, pos), params, f"{MODEL_PREFIX}.embed_ln")


def project_char_channel(encoded: Tensor, params: ParameterSet) -> Tensor:
    return add_bias(matmul(encoded, params[f"{MODEL_PREFIX}.char_proj_w"]),
                    params[f"{MODEL_PREFIX}.char_proj_b"])


class DualChannelModel:
    """Configuration + parameters + forward pass. Stateless between calls."""

    def __init__(self, cfg: ModelConfig, params: ParameterSet | None = None,
                 seed: int | None = None):
        self.cfg = cfg
        if params is None:
            rng = np.random.default_rng([0 if seed is None else seed, 0xA111])
            params = init_model_params(cfg, rng)
        self.params = params

    def copy(self) -> "DualChannelModel":
        return DualChannelModel(self.cfg, self.params.copy())

    def _dropout(self, rng: np.random.Generator | None):
        p = self.cfg.dropout_rate
        if rng is None or p <= 0.0:
            return None

        def apply(t: Tensor) -> Tensor:
            mask = (rng.random(t.shape) >= p) / (1.0 - p)
            return mul(t, constant(mask))
        return apply

    def forward_sample(self, seq: TokenizedSequence, train: bool = False,
                       rng: np.random.Generator | None = None,
                       extra_pad: int = 0) -> tuple[Tensor, Tensor]:
        """Returns (pooled [1 x D], logits [1 x num_users]) for one sequence.

        extra_pad appends masked [PAD] tokens; with masking in place they must
        not change the real rows (padding-invariance contract).
        """
        cfg = self.cfg
        if seq.num_tokens > cfg.max_seq_len:
            warnings.warn(
                f"sequence of {seq.num_tokens} tokens truncated to {cfg.max_seq_len}",
                TruncationWarning, stacklevel=2)
            seq = seq.truncated(cfg.max_seq_len)
        m = seq.num_tokens
        subword_ids = list(seq.subword_ids)
        tokens = enc.sequence_tokens(seq)
        mask_add = None
        if extra_pad > 0:
            if m + extra_pad > cfg.max_seq_len:
                raise ValueError("extra_pad pushes sequence past max_seq_len")
            subword_ids = subword_ids + [PAD_ID] * extra_pad
            tokens = tokens + [([PAD_ID], [0.0], [0.0])] * extra_pad
            total = m + extra_pad
            mask_add = np.zeros((total, total))
            mask_add[:, m:] = ATTENTION_MASK_FILL
        dropout = self._dropout(rng) if train else None

        tok = token_channel_embed(subword_ids, self.params, cfg.max_seq_len)
        encoded = enc.encode_tokens(tokens, self.params, cfg.gru_hidden,
                                    use_temporal=(cfg.mode == "temp_char"),
                                    temporal_mode=cfg.temporal_mode)
        char = project_char_channel(encoded, self.params)
        for layer in range(cfg.num_layers):
            base = f"{MODEL_PREFIX}.layer{layer}"
            tok = transformer_block(tok, self.params, f"{base}.tok", cfg.num_heads,
                                    mask_add, dropout)
            char = transformer_block(char, self.params, f"{base}.char", cfg.num_heads,
                                     mask_add, dropout)
            tok, char = heterogeneous_interaction(tok, char, self.params, f"{base}.inter")
        pooled = row(tok, 0)
        logits = add_bias(matmul(pooled, self.params[f"{MODEL_PREFIX}.head_w"]),
                          self.params[f"{MODEL_PREFIX}.head_b"])
        return pooled, logits

    def logits_batch(self, seqs, train: bool = False,
                     rng: np.random.Generator | None = None) -> Tensor:
        """Stacked logits [B x num_users]; samples never interact."""
        return vstack([self.forward_sample(s, train=train, rng=rng)[1] for s in seqs])

    def pooled_embedding(self, seq: TokenizedSequence) -> np.ndarray:
        pooled, _ = self.forward_sample(seq)
        return pooled.data[0].copy()

    def pooled_embeddings(self, seqs) -> np.ndarray:
        return np.stack([self.pooled_embedding(s) for s in seqs])

    def predict(self, seqs) -> np.ndarray:
        return np.array([int(np.argmax(self.forward_sample(s)[1].data[0])) for s in seqs])
