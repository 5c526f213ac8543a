"""Model variants, size presets and parameter initialization."""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, replace

import numpy as np

from vulnscan.numcore import Tensor

N_CLASSES = 124


class Variant(enum.Enum):
    LSTM = "lstm"
    BILSTM = "bilstm"
    BERT_RNN = "bert-rnn"
    BERT_LSTM = "bert-lstm"
    BERT_BILSTM = "bert-bilstm"

    @property
    def is_bert(self) -> bool:
        return self in (Variant.BERT_RNN, Variant.BERT_LSTM, Variant.BERT_BILSTM)


class Head(enum.Enum):
    VANILLA_RNN = "rnn"
    LSTM = "lstm"
    BILSTM = "bilstm"


HEAD_OF = {Variant.BERT_RNN: Head.VANILLA_RNN, Variant.BERT_LSTM: Head.LSTM, Variant.BERT_BILSTM: Head.BILSTM}

DISPLAY_NAMES = {
    Variant.LSTM: "LSTM",
    Variant.BILSTM: "BiDirectional LSTM",
    Variant.BERT_RNN: "BERT",
    Variant.BERT_LSTM: "BERT + LSTM",
    Variant.BERT_BILSTM: "BERT + BiLSTM",
}


@dataclass(frozen=True)
class ModelConfig:
    variant: Variant
    vocab_size: int
    d_model: int
    n_layers: int
    n_heads: int
    d_ff: int
    seg_len: int
    n_classes: int = N_CLASSES
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} is not divisible by n_heads {self.n_heads}")
        if self.seg_len < 2:
            raise ValueError("seg_len must be at least 2")
        if self.vocab_size < 1 or self.n_classes < 1 or self.n_layers < 0:
            raise ValueError("vocab_size and n_classes must be positive, n_layers non-negative")

    @property
    def d_hidden(self) -> int:
        # recurrent width; the source never states one, so it tracks d_model
        return self.d_model

    @property
    def feature_dim(self) -> int:
        two_way = self.variant in (Variant.BILSTM, Variant.BERT_BILSTM)
        return 2 * self.d_hidden if two_way else self.d_hidden

    def to_json(self) -> str:
        d = asdict(self)
        d["variant"] = self.variant.value
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        d = json.loads(text)
        d["variant"] = Variant(d["variant"])
        return cls(**d)


PRESETS = {
    "desk": dict(d_model=64, n_layers=2, n_heads=4, d_ff=256, seg_len=64),
    "paper": dict(d_model=768, n_layers=12, n_heads=12, d_ff=3072, seg_len=256),
}


def preset(name: str, variant: Variant | str, vocab_size: int, seed: int = 0, **overrides) -> ModelConfig:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    fields = {**PRESETS[name], **overrides}
    return ModelConfig(variant=Variant(variant), vocab_size=vocab_size, seed=seed, **fields)


def with_variant(config: ModelConfig, variant: Variant) -> ModelConfig:
    return replace(config, variant=variant)


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _lstm_params(rng, prefix: str, d_in: int, h: int) -> dict[str, np.ndarray]:
    b = np.zeros(4 * h)
    b[h: 2 * h] = 1.0  # forget gate starts open
    return {
        f"{prefix}.w_x": _uniform(rng, (d_in, 4 * h), d_in),
        f"{prefix}.w_h": _uniform(rng, (h, 4 * h), h),
        f"{prefix}.b": b,
    }


def init_params(config: ModelConfig) -> dict[str, Tensor]:
    """Seeded initial parameters, uniform in +-1/sqrt(fan_in)."""
    rng = np.random.default_rng(config.seed)
    d, h = config.d_model, config.d_hidden
    # a lookup is a one-hot product with a single active input, so fan_in is 1
    arrays: dict[str, np.ndarray] = {"embed.tokens": _uniform(rng, (config.vocab_size, d), 1)}
    v = config.variant
    if v is Variant.LSTM:
        arrays.update(_lstm_params(rng, "lstm.fwd", d, h))
    elif v is Variant.BILSTM:
        arrays.update(_lstm_params(rng, "lstm.fwd", d, h))
        arrays.update(_lstm_params(rng, "lstm.bwd", d, h))
    else:
        arrays["embed.positions"] = _uniform(rng, (config.seg_len, d), 1)
        for layer in range(config.n_layers):
            p = f"block{layer}"
            arrays[f"{p}.ln1.gain"] = np.ones(d)
            arrays[f"{p}.ln1.bias"] = np.zeros(d)
            for name in ("q", "k", "v", "o"):
                arrays[f"{p}.attn.w{name}"] = _uniform(rng, (d, d), d)
                arrays[f"{p}.attn.b{name}"] = np.zeros(d)
            arrays[f"{p}.ln2.gain"] = np.ones(d)
            arrays[f"{p}.ln2.bias"] = np.zeros(d)
            arrays[f"{p}.ff.w1"] = _uniform(rng, (d, config.d_ff), d)
            arrays[f"{p}.ff.b1"] = np.zeros(config.d_ff)
            arrays[f"{p}.ff.w2"] = _uniform(rng, (config.d_ff, d), config.d_ff)
            arrays[f"{p}.ff.b2"] = np.zeros(d)
        arrays["mlm.bias"] = np.zeros(config.vocab_size)
        head = HEAD_OF[v]
        if head is Head.VANILLA_RNN:
            arrays["head.rnn.w_x"] = _uniform(rng, (d, h), d)
            arrays["head.rnn.w_h"] = _uniform(rng, (h, h), h)
            arrays["head.rnn.b"] = np.zeros(h)
        else:
            arrays.update(_lstm_params(rng, "head.fwd", d, h))
            if head is Head.BILSTM:
                arrays.update(_lstm_params(rng, "head.bwd", d, h))
    f = config.feature_dim
    arrays["cls.w"] = _uniform(rng, (f, config.n_classes), f)
    arrays["cls.b"] = np.zeros(config.n_classes)
    return {name: Tensor(a, requires_grad=True) for name, a in arrays.items()}
