"""Summary table over trained checkpoints: accuracy, FLOPs and unique tokens."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from vulnscan.corpus import CleanRecord
from vulnscan.models import DISPLAY_NAMES, Checkpoint
from vulnscan.tokenizer import Vocabulary, count_unique_tokens
from vulnscan.trainer.flops import CONVENTION, REFERENCE_LENGTH, count_flops
from vulnscan.trainer.metrics import evaluate

COLUMNS = ("Model", "Accuracy", "FLOPs", "UniqueTokens")


@dataclass
class Row:
    model: str
    accuracy: float
    flops: int
    unique_tokens: int
    binary_accuracy: float


@dataclass
class Report:
    rows: list[Row]
    convention: str
    extras: dict = field(default_factory=dict)

    def tsv(self) -> str:
        lines = ["\t".join(COLUMNS)]
        lines += [f"{r.model}\t{r.accuracy:.4f}\t{r.flops}\t{r.unique_tokens}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def json(self) -> str:
        return json.dumps(
            {
                "columns": list(COLUMNS),
                "convention": self.convention,
                "rows": [
                    {
                        "Model": r.model,
                        "Accuracy": r.accuracy,
                        "FLOPs": r.flops,
                        "UniqueTokens": r.unique_tokens,
                        "BinaryAccuracy": r.binary_accuracy,
                    }
                    for r in self.rows
                ],
            },
            sort_keys=True,
        )

    def human(self) -> str:
        cells = [list(COLUMNS)] + [
            [r.model, f"{100 * r.accuracy:.2f}%", _si(r.flops), _si(r.unique_tokens)] for r in self.rows
        ]
        widths = [max(len(row[i]) for row in cells) for i in range(len(COLUMNS))]
        out = ["  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells]
        out.append(f"FLOPs convention: {self.convention}")
        return "\n".join(out) + "\n"


def _si(n: int) -> str:
    for unit, scale in (("G", 1e9), ("M", 1e6), ("k", 1e3)):
        if n >= scale:
            return f"{n / scale:.3g}{unit}"
    return str(n)


def table_report(
    checkpoints: Sequence[Checkpoint],
    records: Sequence[CleanRecord],
    vocab: Vocabulary,
    input_length: int = REFERENCE_LENGTH,
) -> Report:
    """One row per checkpoint, all evaluated on the same records.

    Recurrent-only rows count whole-word types over the records; transformer
    rows count the subword vocabulary.
    """
    words = count_unique_tokens(r.text for r in records)
    rows = []
    for ckpt in checkpoints:
        m = evaluate(ckpt, records, vocab)
        cfg = ckpt.config
        rows.append(
            Row(
                model=DISPLAY_NAMES[cfg.variant],
                accuracy=m.accuracy,
                flops=count_flops(cfg, input_length).total,
                unique_tokens=len(vocab) if cfg.variant.is_bert else words,
                binary_accuracy=m.binary_accuracy,
            )
        )
    return Report(rows, CONVENTION.format(n=input_length))
