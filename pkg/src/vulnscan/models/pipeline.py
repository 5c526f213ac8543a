"""End-to-end forward passes: token ids to class distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from vulnscan import numcore as nc
from vulnscan.models.config import HEAD_OF, ModelConfig, Variant
from vulnscan.models.layers import (
    Params,
    bidirectional_final,
    chain_segments,
    classifier_logits,
    embed,
    encode_segments,
    lstm_states,
)
from vulnscan.numcore import ShapeError, Tensor
from vulnscan.tokenizer import PAD, TokenSequence, Vocabulary, encode, segment


@dataclass(frozen=True)
class Prediction:
    distribution: np.ndarray
    argmax_label: int
    per_segment_pooled: tuple[np.ndarray, ...] = ()
    logits: np.ndarray | None = None

    def top(self, k: int = 5) -> list[tuple[int, float]]:
        # stable sort keeps the lowest index first among equal probabilities
        order = np.argsort(-self.distribution, kind="stable")[:k]
        return [(int(i), float(self.distribution[i])) for i in order]

    def log_prob(self, label: int) -> float:
        z = self.logits - self.logits.max()
        return float(z[label] - np.log(np.exp(z).sum()))


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def prediction_from_logits(logits: np.ndarray, pooled: Sequence[np.ndarray] = ()) -> Prediction:
    logits = np.asarray(logits, dtype=np.float64)
    dist = _softmax(logits)
    # np.argmax returns the first maximum, i.e. the lowest index on ties
    return Prediction(dist, int(np.argmax(dist)), tuple(pooled), logits)


def classify(features: Tensor, params: Params) -> Prediction:
    return prediction_from_logits(classifier_logits(features, params).data)


def _ids(seq) -> np.ndarray:
    ids = np.asarray(getattr(seq, "ids", seq), dtype=np.int64)
    if ids.size == 0:
        raise ValueError("cannot classify an empty token sequence")
    return ids


def lstm_features(seq, params: Params) -> Tensor:
    return lstm_states(embed(_ids(seq), params), params, "lstm.fwd")[-1]


def bilstm_features(seq, params: Params) -> Tensor:
    return bidirectional_final(embed(_ids(seq), params), params, "lstm")


def lstm_classify(seq: TokenSequence, params: Params) -> Prediction:
    return classify(lstm_features(seq, params), params)


def bilstm_classify(seq: TokenSequence, params: Params) -> Prediction:
    return classify(bilstm_features(seq, params), params)


def _segment_arrays(seqs: Sequence[TokenSequence], seg_len: int) -> tuple[np.ndarray, np.ndarray, list[int]]:
    ids, masks, counts = [], [], []
    for seq in seqs:
        segs = segment(seq, seg_len)
        counts.append(len(segs))
        ids.extend(s.ids for s in segs)
        masks.extend(s.mask for s in segs)
    return np.array(ids, dtype=np.int64), np.array(masks, dtype=np.float64), counts


def bert_features(config: ModelConfig, params: Params, seqs: Sequence[TokenSequence]) -> tuple[list[Tensor], Tensor]:
    """Chained features per sequence, plus the pooled CLS vectors [n_segments, d].

    All segments of all sequences go through the encoder as one batch.
    """
    ids, masks, counts = _segment_arrays(seqs, config.seg_len)
    pooled = encode_segments(ids, masks, params, config)[:, 0]
    head = HEAD_OF[config.variant]
    feats, start = [], 0
    for n in counts:
        feats.append(chain_segments(pooled[start: start + n], head, params))
        start += n
    return feats, pooled


def forward_logits(config: ModelConfig, params: Params, seqs: Sequence[TokenSequence]) -> Tensor:
    """Logits [B, n_classes] for a batch of token sequences."""
    if not seqs:
        raise ValueError("forward_logits needs at least one sequence")
    if config.variant is Variant.LSTM:
        feats = [lstm_features(s, params) for s in seqs]
    elif config.variant is Variant.BILSTM:
        feats = [bilstm_features(s, params) for s in seqs]
    else:
        feats, _ = bert_features(config, params, seqs)
    return classifier_logits(nc.stack_rows(feats), params)


def predict_sequence(seq: TokenSequence, config: ModelConfig, params: Params) -> Prediction:
    if len(params["embed.tokens"].data) != config.vocab_size:
        raise ShapeError("parameters do not match the model configuration")
    with nc.no_grad():
        if not config.variant.is_bert:
            if len(seq.ids) == 0:
                seq = TokenSequence((PAD,), (0,))
            logits = forward_logits(config, params, [seq])
            return prediction_from_logits(logits.data[0])
        feats, pooled = bert_features(config, params, [seq])
        logits = classifier_logits(feats[0], params)
        return prediction_from_logits(logits.data, list(pooled.data))


def predict(text: str, vocab: Vocabulary, config: ModelConfig, params: Params) -> Prediction:
    """Class distribution for one preprocessed source text."""
    if len(vocab) != config.vocab_size:
        raise ShapeError(f"vocabulary has {len(vocab)} tokens, model expects {config.vocab_size}")
    return predict_sequence(encode(text, vocab), config, params)
