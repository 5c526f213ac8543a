"""Evaluation of a checkpoint on labelled records."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from vulnscan.corpus import CleanRecord
from vulnscan.models import Checkpoint, predict_sequence
from vulnscan.tokenizer import Vocabulary, encode


class ConfigMismatchError(ValueError):
    pass


@dataclass
class Metrics:
    accuracy: float
    per_class_accuracy: np.ndarray
    confusion: np.ndarray
    loss: float
    binary_accuracy: float

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "binary_accuracy": self.binary_accuracy,
            "loss": self.loss,
            "per_class_accuracy": [float(a) for a in self.per_class_accuracy],
            "confusion": self.confusion.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def metrics_from_predictions(labels: Sequence[int], predicted: Sequence[int], losses: Sequence[float], n_classes: int) -> Metrics:
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    for y, p in zip(labels, predicted):
        confusion[y, p] += 1
    total = int(confusion.sum())
    support = confusion.sum(axis=1)
    diag = np.diag(confusion)
    # classes with no samples report 0.0
    per_class = np.divide(diag, support, out=np.zeros(n_classes), where=support > 0)
    accuracy = float(np.trace(confusion)) / total if total else 0.0
    # class 0 is the non-vulnerable label
    binary_hits = sum((y == 0) == (p == 0) for y, p in zip(labels, predicted))
    return Metrics(
        accuracy=accuracy,
        per_class_accuracy=per_class,
        confusion=confusion,
        loss=math.fsum(losses) / total if total else 0.0,
        binary_accuracy=binary_hits / total if total else 0.0,
    )


def check_compatible(ckpt: Checkpoint, vocab: Vocabulary) -> None:
    if ckpt.config.vocab_size != len(vocab):
        raise ConfigMismatchError(f"checkpoint expects a vocabulary of {ckpt.config.vocab_size}, got {len(vocab)}")


def evaluate(ckpt: Checkpoint, records: Sequence[CleanRecord], vocab: Vocabulary) -> Metrics:
    """Top-1 metrics of ``ckpt`` over ``records``, one forward pass per record.

    Records are scored independently and the loss is summed exactly, so the
    result does not depend on record order.
    """
    check_compatible(ckpt, vocab)
    n = ckpt.config.n_classes
    labels, predicted, losses = [], [], []
    for rec in records:
        if not 0 <= rec.label < n:
            raise ConfigMismatchError(f"record {rec.id} has label {rec.label}, model has {n} classes")
        pred = predict_sequence(encode(rec.text, vocab), ckpt.config, ckpt.params)
        labels.append(rec.label)
        predicted.append(pred.argmax_label)
        losses.append(-pred.log_prob(rec.label))
    return metrics_from_predictions(labels, predicted, losses, n)
