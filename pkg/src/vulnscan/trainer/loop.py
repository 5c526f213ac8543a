"""Mini-batch training with best-validation checkpoint selection."""

from __future__ import annotations

import enum
import json
import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from vulnscan import numcore as nc
from vulnscan.corpus import CleanRecord
from vulnscan.models import Checkpoint, ModelConfig, forward_logits, init_params, mlm_loss, predict_sequence
from vulnscan.numcore import Tensor
from vulnscan.tokenizer import PAD, Segment, TokenSequence, Vocabulary, encode
from vulnscan.trainer.optim import Adam, Sgd, clip_grad_norm


class Optimizer(enum.Enum):
    ADAM = "adam"
    SGD = "sgd"


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    # None picks the family default: 1 for recurrent-only models, 8 otherwise
    batch_size: int | None = None
    max_epochs: int = 20
    seed: int = 0
    optimizer: Optimizer = Optimizer.ADAM
    grad_clip: float | None = 1.0
    early_stop_patience: int | None = None
    # stop as soon as validation accuracy reaches this value
    target_accuracy: float | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if (self.batch_size is not None and self.batch_size < 1) or self.max_epochs < 0:
            raise ValueError("batch_size must be >= 1 and max_epochs >= 0")

    def batch_for(self, config: ModelConfig) -> int:
        if self.batch_size is not None:
            return self.batch_size
        # variable-length sequences train one at a time, without padding
        return 8 if config.variant.is_bert else 1


@dataclass
class LogEntry:
    epoch: int
    train_loss: float
    val_accuracy: float
    seconds: float

    def to_json(self) -> str:
        return json.dumps(
            {"epoch": self.epoch, "train_loss": self.train_loss, "val_accuracy": self.val_accuracy, "seconds": self.seconds},
            sort_keys=True,
        )


def _validate(config: ModelConfig, params, seqs: Sequence[TokenSequence], labels: Sequence[int]) -> tuple[float, float]:
    """Accuracy and mean cross-entropy over the validation sequences."""
    hits, losses = 0, []
    for s, y in zip(seqs, labels):
        pred = predict_sequence(s, config, params)
        hits += pred.argmax_label == y
        losses.append(-pred.log_prob(y))
    return hits / len(seqs), math.fsum(losses) / len(seqs)


def _snapshot(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {k: p.data.copy() for k, p in params.items()}


def train(
    config: ModelConfig,
    vocab: Vocabulary,
    train_records: Sequence[CleanRecord],
    val_records: Sequence[CleanRecord],
    tc: TrainConfig,
    labels: Sequence[str] = (),
    params: dict[str, Tensor] | None = None,
    on_epoch: Callable[[LogEntry], None] | None = None,
) -> tuple[Checkpoint, list[LogEntry]]:
    """Fine-tune a classifier with cross-entropy and return the best-validation parameters.

    Epochs are ranked by validation accuracy, then by lower validation loss,
    since accuracy on a small validation set saturates; exact ties keep the
    earlier epoch. Patience counts epochs without a better rank. With no
    validation records the training set doubles as validation.
    """
    if not train_records:
        raise ValueError("training data is empty")
    if len(vocab) != config.vocab_size:
        raise ValueError(f"vocabulary has {len(vocab)} tokens, model expects {config.vocab_size}")
    if labels and len(labels) != config.n_classes:
        raise ValueError(f"{len(labels)} label tags for a {config.n_classes}-class model")
    for rec in [*train_records, *val_records]:
        if not 0 <= rec.label < config.n_classes:
            raise ValueError(f"record {rec.id} has label {rec.label} outside {config.n_classes} classes")

    params = init_params(config) if params is None else params
    train_seqs = [encode(r.text, vocab) for r in train_records]
    if not config.variant.is_bert:
        # same empty-input policy as predict: a lone PAD step
        train_seqs = [s if len(s) else TokenSequence((PAD,), (0,)) for s in train_seqs]
    train_y = np.array([r.label for r in train_records], dtype=np.int64)
    val_src = val_records or train_records
    val_seqs = [encode(r.text, vocab) for r in val_src]
    val_y = [r.label for r in val_src]

    opt = Adam(params, tc.learning_rate) if tc.optimizer is Optimizer.ADAM else Sgd(params, tc.learning_rate)
    rng = np.random.default_rng(tc.seed)
    batch_size = tc.batch_for(config)
    log: list[LogEntry] = []
    best_key, best_params, stale = (-1.0, 0.0), _snapshot(params), 0

    for epoch in range(1, tc.max_epochs + 1):
        start = time.perf_counter()
        order = rng.permutation(len(train_seqs))
        batch_losses = []
        for b in range(0, len(order), batch_size):
            idx = order[b: b + batch_size]
            for p in params.values():
                p.grad = None
            try:
                logits = forward_logits(config, params, [train_seqs[i] for i in idx])
                loss = nc.cross_entropy(logits, train_y[idx])
            except nc.NumericalError as exc:
                raise TrainingError(f"training diverged at epoch {epoch}: {exc}") from exc
            value = loss.item()
            if not math.isfinite(value):
                raise TrainingError(f"training diverged at epoch {epoch}: loss is {value}")
            nc.backward(loss)
            if tc.grad_clip is not None:
                clip_grad_norm(params, tc.grad_clip)
            opt.step()
            batch_losses.append(value * len(idx))
        train_loss = math.fsum(batch_losses) / len(order)
        val_acc, val_loss = _validate(config, params, val_seqs, val_y)
        entry = LogEntry(epoch, train_loss, val_acc, time.perf_counter() - start)
        log.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
        if (val_acc, -val_loss) > best_key:
            best_key, best_params, stale = (val_acc, -val_loss), _snapshot(params), 0
        else:
            stale += 1
        if tc.target_accuracy is not None and val_acc >= tc.target_accuracy:
            break
        if tc.early_stop_patience is not None and stale >= tc.early_stop_patience:
            break

    final = {k: Tensor(v, requires_grad=True) for k, v in best_params.items()}
    return Checkpoint(config, final, tuple(labels)), log


def pretrain_mlm(
    config: ModelConfig,
    params: dict[str, Tensor],
    segments: Sequence[Segment],
    steps: int,
    learning_rate: float = 1e-3,
    batch_size: int = 8,
    mask_rate: float = 0.15,
    seed: int = 0,
) -> list[float]:
    """Masked-token pre-training of the encoder; returns the loss of each step.

    Every step draws a fresh batch and a fresh masking seed from ``seed``.
    """
    if not config.variant.is_bert:
        raise ValueError("masked-token pre-training applies to transformer variants only")
    if not segments:
        raise ValueError("no segments to pre-train on")
    opt = Adam(params, learning_rate)
    rng = np.random.default_rng(seed)
    losses = []
    for _ in range(steps):
        idx = rng.choice(len(segments), size=min(batch_size, len(segments)), replace=False)
        for p in params.values():
            p.grad = None
        loss = mlm_loss([segments[i] for i in idx], params, config, mask_rate, int(rng.integers(2**31)))
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingError(f"pre-training diverged at step {len(losses) + 1}")
        nc.backward(loss)
        opt.step()
        losses.append(value)
    return losses
