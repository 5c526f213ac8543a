"""Analytic forward-pass operation counts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from vulnscan.models import HEAD_OF, Head, ModelConfig, Variant

REFERENCE_LENGTH = 512

CONVENTION = (
    "forward pass for one file of {n} tokens; multiply-add = 2 FLOPs, affine(in,out) = 2*in*out + out; "
    "nonlinearity (sigmoid, tanh, relu) = 1 FLOP/element; softmax = 4 FLOPs/element; "
    "layer norm = 7 FLOPs/element; elementwise add/mul = 1 FLOP; embedding lookup = 0; "
    "transformer variants: ceil(n/(seg_len-1)) segments of seg_len positions each"
)


@dataclass
class FlopsReport:
    per_component: dict[str, int]
    convention: str
    total: int = field(init=False)

    def __post_init__(self):
        self.total = sum(self.per_component.values())


def affine(n_in: int, n_out: int) -> int:
    return 2 * n_in * n_out + n_out


def lstm_step_flops(d_in: int, h: int) -> int:
    # 3 sigmoid + 2 tanh, then f*c, i*g, their sum, and o*tanh(c)
    return affine(d_in + h, 4 * h) + 5 * h + 4 * h


def rnn_step_flops(d_in: int, h: int) -> int:
    return affine(d_in + h, h) + h


def block_flops(L: int, d: int, n_heads: int, d_ff: int) -> int:
    norms = 2 * 7 * L * d
    projections = 4 * L * affine(d, d)
    scores = 2 * L * L * d
    scaling = L * L * n_heads
    mask = L * L * n_heads
    softmax = 4 * L * L * n_heads
    mixing = 2 * L * L * d
    residuals = 2 * L * d
    ff = L * (affine(d, d_ff) + d_ff + affine(d_ff, d))
    return norms + projections + scores + scaling + mask + softmax + mixing + residuals + ff


def n_segments(input_length: int, seg_len: int) -> int:
    return math.ceil(max(input_length, 1) / (seg_len - 1))


def count_flops(config: ModelConfig, input_length: int = REFERENCE_LENGTH) -> FlopsReport:
    """Per-component forward FLOPs of classifying one file of ``input_length`` tokens."""
    if input_length < 1:
        raise ValueError("input_length must be at least 1")
    d, h, C = config.d_model, config.d_hidden, config.n_classes
    classifier = affine(config.feature_dim, C) + 4 * C
    v = config.variant
    if not v.is_bert:
        directions = 2 if v is Variant.BILSTM else 1
        parts = {
            "recurrence": directions * input_length * lstm_step_flops(d, h),
            "classifier": classifier,
        }
    else:
        S, L = n_segments(input_length, config.seg_len), config.seg_len
        head = HEAD_OF[v]
        if head is Head.VANILLA_RNN:
            head_flops = S * rnn_step_flops(d, h)
        else:
            head_flops = (2 if head is Head.BILSTM else 1) * S * lstm_step_flops(d, h)
        parts = {
            "embedding": S * L * d,
            "transformer_stack": S * config.n_layers * block_flops(L, d, config.n_heads, config.d_ff),
            "head": head_flops,
            "classifier": classifier,
        }
    return FlopsReport(parts, CONVENTION.format(n=input_length))
