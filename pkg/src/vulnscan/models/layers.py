"""Building blocks: embeddings, LSTM cells, attention, transformer blocks, heads."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from vulnscan import numcore as nc
from vulnscan.models.config import Head, ModelConfig
from vulnscan.numcore import ShapeError, Tensor
from vulnscan.tokenizer import MASK, N_SPECIAL, Segment

Params = dict[str, Tensor]


def embed(ids, params: Params, positions: bool = False) -> Tensor:
    """Token embeddings for ``ids`` ([L] or [S, L]); adds learned positions if asked."""
    ids = np.asarray(getattr(ids, "ids", ids), dtype=np.int64)
    x = nc.embedding(params["embed.tokens"], ids)
    if positions:
        table = params["embed.positions"]
        L = ids.shape[-1]
        if L > table.shape[0]:
            raise ShapeError(f"sequence of {L} exceeds {table.shape[0]} positions")
        pos = nc.embedding(table, np.broadcast_to(np.arange(L), ids.shape))
        x = nc.add(x, pos)
    return x


# -- recurrent cells ---------------------------------------------------------


def lstm_step(x: Tensor, h: Tensor, c: Tensor, params: Params, prefix: str = "lstm.fwd") -> tuple[Tensor, Tensor]:
    """One LSTM step built from primitive ops; gate blocks are (i, f, o, g)."""
    H = h.shape[-1]
    z = nc.add(nc.add(nc.matmul(x, params[f"{prefix}.w_x"]), nc.matmul(h, params[f"{prefix}.w_h"])), params[f"{prefix}.b"])
    gates = nc.sigmoid(z[..., : 3 * H])
    i, f, o = gates[..., :H], gates[..., H: 2 * H], gates[..., 2 * H:]
    g = nc.tanh(z[..., 3 * H:])
    c_new = nc.add(nc.mul(f, c), nc.mul(i, g))
    h_new = nc.mul(o, nc.tanh(c_new))
    return h_new, c_new


def lstm_states(x: Tensor, params: Params, prefix: str, reverse: bool = False) -> Tensor:
    """Hidden states [T, H] of an LSTM over x [T, d], aligned to input positions."""
    if reverse:
        x = x[::-1]
    xproj = nc.add(nc.matmul(x, params[f"{prefix}.w_x"]), params[f"{prefix}.b"])
    hs = nc.lstm_scan(xproj, params[f"{prefix}.w_h"])
    return hs[::-1] if reverse else hs


def rnn_final(x: Tensor, params: Params, prefix: str = "head.rnn") -> Tensor:
    """Final state of h' = tanh(W_x x + W_h h + b) from h = 0."""
    xw = nc.add(nc.matmul(x, params[f"{prefix}.w_x"]), params[f"{prefix}.b"])
    h = nc.tanh(xw[0])
    for t in range(1, x.shape[0]):
        h = nc.tanh(nc.add(xw[t], nc.matmul(h, params[f"{prefix}.w_h"])))
    return h


def bidirectional_final(x: Tensor, params: Params, prefix: str) -> Tensor:
    """Concatenated final states of a forward and a backward LSTM over x [T, d]."""
    fwd = lstm_states(x, params, f"{prefix}.fwd")
    bwd = lstm_states(x, params, f"{prefix}.bwd", reverse=True)
    return nc.concat([fwd[-1], bwd[0]], axis=-1)


# -- transformer -------------------------------------------------------------


def _as_batch(x: Tensor, mask) -> tuple[Tensor, np.ndarray, bool]:
    mask = np.asarray(mask, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = nc.reshape(x, (1,) + x.shape)
        mask = mask.reshape(1, -1)
    if mask.shape != x.shape[:2]:
        raise ShapeError(f"attention mask {mask.shape} does not match sequence shape {x.shape[:2]}")
    return x, mask, single


def attention(x: Tensor, mask, params: Params, prefix: str, n_heads: int, return_weights: bool = False):
    """Multi-head scaled dot-product self-attention over x [L, d] or [S, L, d].

    Masked (PAD) keys get a -1e30 bias before the softmax, which underflows
    their weight to exactly zero.
    """
    x, mask, single = _as_batch(x, mask)
    S, L, d = x.shape
    dh = d // n_heads

    def heads(name: str) -> Tensor:
        y = nc.add(nc.matmul(x, params[f"{prefix}.w{name}"]), params[f"{prefix}.b{name}"])
        y = nc.transpose(nc.reshape(y, (S, L, n_heads, dh)), (0, 2, 1, 3))
        return nc.reshape(y, (S * n_heads, L, dh))

    q, k, v = heads("q"), heads("k"), heads("v")
    scores = nc.scale(nc.matmul(q, nc.transpose(k, (0, 2, 1))), 1.0 / math.sqrt(dh))
    bias = np.where(mask > 0, 0.0, -1e30)[:, None, None, :]
    bias = np.broadcast_to(bias, (S, n_heads, L, L)).reshape(S * n_heads, L, L)
    weights = nc.softmax(nc.add(scores, Tensor(bias)))
    ctx = nc.matmul(weights, v)
    ctx = nc.reshape(nc.transpose(nc.reshape(ctx, (S, n_heads, L, dh)), (0, 2, 1, 3)), (S, L, d))
    out = nc.add(nc.matmul(ctx, params[f"{prefix}.wo"]), params[f"{prefix}.bo"])
    if single:
        out = nc.reshape(out, (L, d))
    if return_weights:
        return out, weights.data.reshape(S, n_heads, L, L)
    return out


def feed_forward(x: Tensor, params: Params, prefix: str) -> Tensor:
    hidden = nc.relu(nc.add(nc.matmul(x, params[f"{prefix}.w1"]), params[f"{prefix}.b1"]))
    return nc.add(nc.matmul(hidden, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])


def transformer_block(x: Tensor, mask, params: Params, prefix: str, n_heads: int) -> Tensor:
    """Pre-norm residual block: y = x + attn(LN(x)); out = y + ff(LN(y))."""
    a = nc.layer_norm(x, params[f"{prefix}.ln1.gain"], params[f"{prefix}.ln1.bias"])
    y = nc.add(x, attention(a, mask, params, f"{prefix}.attn", n_heads))
    b = nc.layer_norm(y, params[f"{prefix}.ln2.gain"], params[f"{prefix}.ln2.bias"])
    return nc.add(y, feed_forward(b, params, f"{prefix}.ff"))


def encode_segments(ids: np.ndarray, mask: np.ndarray, params: Params, config: ModelConfig) -> Tensor:
    """Final hidden states [S, L, d] for a batch of segments."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 2 or ids.shape[1] != config.seg_len:
        raise ShapeError(f"segments must be [S, {config.seg_len}], got {ids.shape}")
    x = embed(ids, params, positions=True)
    for layer in range(config.n_layers):
        x = transformer_block(x, mask, params, f"block{layer}", config.n_heads)
    return x


def bert_encode(segment: Segment, params: Params, config: ModelConfig) -> Tensor:
    """Pooled [d] representation of one segment: the final hidden state at CLS."""
    if len(segment.ids) != config.seg_len:
        raise ShapeError(f"segment length {len(segment.ids)} != seg_len {config.seg_len}")
    hidden = encode_segments(np.array([segment.ids]), np.array([segment.mask]), params, config)
    return hidden[0, 0]


def chain_segments(pooled: Sequence[Tensor] | Tensor, head: Head, params: Params) -> Tensor:
    """Run the recurrent head over per-segment vectors in order."""
    if isinstance(pooled, Tensor):
        x = pooled
    else:
        if not pooled:
            raise ValueError("chain_segments needs at least one pooled vector")
        x = nc.stack_rows(pooled)
    if x.shape[0] < 1:
        raise ValueError("chain_segments needs at least one pooled vector")
    if head is Head.VANILLA_RNN:
        return rnn_final(x, params, "head.rnn")
    if head is Head.LSTM:
        return lstm_states(x, params, "head.fwd")[-1]
    return bidirectional_final(x, params, "head")


def classifier_logits(features: Tensor, params: Params) -> Tensor:
    w = params["cls.w"]
    if features.shape[-1] != w.shape[0]:
        raise ShapeError(f"classifier expects {w.shape[0]} features, got {features.shape[-1]}")
    return nc.add(nc.matmul(features, w), params["cls.b"])


# -- masked language modelling -----------------------------------------------


def choose_masked(segment: Segment, mask_rate: float, seed: int) -> np.ndarray:
    ids = np.asarray(segment.ids)
    eligible = np.flatnonzero((np.asarray(segment.mask) > 0) & (ids >= N_SPECIAL))
    if mask_rate <= 0 or eligible.size == 0:
        return np.zeros(0, dtype=np.int64)
    n = min(max(1, int(round(mask_rate * eligible.size))), eligible.size)
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(eligible, size=n, replace=False))


def mlm_loss(segments: Segment | Sequence[Segment], params: Params, config: ModelConfig, mask_rate: float = 0.15, seed: int = 0) -> Tensor:
    """Cross-entropy of recovering masked tokens, vocabulary logits tied to the embeddings.

    Each segment's masked positions are drawn from ``seed + its index``.
    Returns 0 when nothing gets masked.
    """
    if isinstance(segments, Segment):
        segments = [segments]
    ids = np.array([s.ids for s in segments], dtype=np.int64)
    mask = np.array([s.mask for s in segments], dtype=np.float64)
    rows, cols = [], []
    for k, seg in enumerate(segments):
        pos = choose_masked(seg, mask_rate, seed + k)
        rows.extend([k] * len(pos))
        cols.extend(pos.tolist())
    if not rows:
        return Tensor(0.0)
    targets = ids[rows, cols]
    corrupted = ids.copy()
    corrupted[rows, cols] = MASK
    hidden = encode_segments(corrupted, mask, params, config)
    picked = hidden[np.array(rows), np.array(cols)]
    logits = nc.add(nc.matmul(picked, nc.transpose(params["embed.tokens"])), params["mlm.bias"])
    return nc.cross_entropy(logits, targets)
