"""Temporal-character encoder: character + timing embeddings contextualized by
a per-token bidirectional GRU.

Each token is encoded independently (state resets at token boundaries). Tokens
are packed row-wise into [num_tokens x max_chars] matrices and stepped jointly;
a 0/1 carry mask freezes a row's hidden state once its token has ended, which
is exactly equivalent to running each token to its own length.

For every character j of token i the GRU input is the character embedding
e = W_char[c], optionally shifted by a temporal embedding:

    separate mode:  u = d * T_d + f * T_f
    shared mode:    u = (d + f) * T_d    (a single matrix serves both times,
                                          so only d + f survives)

The token vector is the forward-direction final state concatenated with the
backward-direction final state (2H wide).
"""

from __future__ import annotations

import numpy as np

from .params import ParameterSet, normal_embedding, xavier_uniform, zeros
from .tensor import (Tensor, add, add_bias, concat_cols, constant, embedding, matmul, mul, neg,
                     sigmoid, tanh)

ENCODER_PREFIX = "tempchar_encoder"
TEMPORAL_MODES = ("separate", "shared")
GATES = ("z", "r", "h")


def init_encoder_params(params: ParameterSet, rng: np.random.Generator, num_chars: int,
                        embed_size: int, gru_hidden: int, temporal_mode: str = "separate") -> None:
    if temporal_mode not in TEMPORAL_MODES:
        raise ValueError(f"unknown temporal_mode {temporal_mode!r}")
    params.add(f"{ENCODER_PREFIX}.char_embed", normal_embedding(rng, num_chars, embed_size))
    params.add(f"{ENCODER_PREFIX}.temporal_d", normal_embedding(rng, 1, embed_size))
    if temporal_mode == "separate":
        params.add(f"{ENCODER_PREFIX}.temporal_f", normal_embedding(rng, 1, embed_size))
    for direction in ("fwd", "bwd"):
        for gate in GATES:
            base = f"{ENCODER_PREFIX}.gru_{direction}"
            params.add(f"{base}.w_{gate}", xavier_uniform(rng, embed_size, gru_hidden))
            params.add(f"{base}.u_{gate}", xavier_uniform(rng, gru_hidden, gru_hidden))
            params.add(f"{base}.b_{gate}", zeros(1, gru_hidden))


def gru_step(x: Tensor, h: Tensor, params: ParameterSet, prefix: str) -> Tensor:
    """z/r gates, candidate state, then h' = (1 - z) * h + z * h_cand."""

    def gate(name):
        return add_bias(add(matmul(x, params[f"{prefix}.w_{name}"]),
                            matmul(h, params[f"{prefix}.u_{name}"])),
                        params[f"{prefix}.b_{name}"])

    z = sigmoid(gate("z"))
    r = sigmoid(gate("r"))
    h_cand = tanh(add_bias(add(matmul(x, params[f"{prefix}.w_h"]),
                               matmul(mul(r, h), params[f"{prefix}.u_h"])),
                           params[f"{prefix}.b_h"]))
    one_minus_z = add(neg(z), 1.0)
    return add(mul(one_minus_z, h), mul(z, h_cand))


def _padded(tokens, reverse: bool):
    """Pack per-token char ids and times into [T x N] arrays (+ carry mask)."""
    T = len(tokens)
    N = max(len(chars) for chars, _, _ in tokens)
    ids = np.zeros((T, N), dtype=np.intp)
    d = np.zeros((T, N))
    f = np.zeros((T, N))
    mask = np.zeros((T, N))
    for i, (chars, ds, fs) in enumerate(tokens):
        n = len(chars)
        seq = list(zip(chars, ds, fs))
        if reverse:
            seq = seq[::-1]
        for j, (c, dv, fv) in enumerate(seq):
            ids[i, j] = c
            d[i, j] = dv
            f[i, j] = fv
            mask[i, j] = 1.0
    return ids, d, f, mask


def _direction_final(tokens, params: ParameterSet, use_temporal: bool, temporal_mode: str,
                     direction: str, gru_hidden: int) -> Tensor:
    ids, d, f, mask = _padded(tokens, reverse=(direction == "bwd"))
    T, N = ids.shape
    w_char = params[f"{ENCODER_PREFIX}.char_embed"]
    prefix = f"{ENCODER_PREFIX}.gru_{direction}"
    h = constant(np.zeros((T, gru_hidden)))
    for j in range(N):
        x = embedding(w_char, ids[:, j])
        if use_temporal:
            if temporal_mode == "shared":
                u = matmul(constant((d[:, j] + f[:, j]).reshape(T, 1)),
                           params[f"{ENCODER_PREFIX}.temporal_d"])
            else:
                u = add(matmul(constant(d[:, j].reshape(T, 1)),
                               params[f"{ENCODER_PREFIX}.temporal_d"]),
                        matmul(constant(f[:, j].reshape(T, 1)),
                               params[f"{ENCODER_PREFIX}.temporal_f"]))
            x = add(x, u)
        h_new = gru_step(x, h, params, prefix)
        m = np.repeat(mask[:, j:j + 1], gru_hidden, axis=1)
        # rows whose token already ended keep their final state
        h = add(mul(h_new, constant(m)), mul(h, constant(1.0 - m)))
    return h


def encode_tokens(tokens, params: ParameterSet, gru_hidden: int, use_temporal: bool,
                  temporal_mode: str = "separate") -> Tensor:
    """Token-level embeddings [num_tokens x 2H]: forward-final || backward-final.

    tokens: sequence of (char_ids, dwell, flight) triples, one per token.
    """
    tokens = list(tokens)
    if not tokens:
        raise ValueError("encode_tokens: empty token sequence")
    if temporal_mode not in TEMPORAL_MODES:
        raise ValueError(f"unknown temporal_mode {temporal_mode!r}")
    for i, (chars, ds, fs) in enumerate(tokens):
        if len(chars) == 0:
            raise ValueError(f"token {i} has no characters")
        if use_temporal and (len(ds) != len(chars) or len(fs) != len(chars)):
            raise ValueError(
                f"token {i}: {len(chars)} chars but {len(ds)} dwell / {len(fs)} flight values")
    fwd = _direction_final(tokens, params, use_temporal, temporal_mode, "fwd", gru_hidden)
    bwd = _direction_final(tokens, params, use_temporal, temporal_mode, "bwd", gru_hidden)
    return concat_cols([fwd, bwd])


def sequence_tokens(seq) -> list[tuple[list[int], list[float], list[float]]]:
    """View a TokenizedSequence as encoder input triples."""
    return list(zip(seq.char_ids, seq.dwell, seq.flight))
