"""Pair-atomic splitting and the line-delimited dataset file."""

from __future__ import annotations

import json
import math
import os
import random
from collections import defaultdict
from dataclasses import replace

from vulnscan.corpus.sard import N_CLASSES, CleanRecord, Split


class DatasetFormatError(ValueError):
    pass


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def split_dataset(records: list[CleanRecord], ratios=(0.8, 0.1, 0.1), seed: int = 0) -> list[CleanRecord]:
    """Assign train/val/test splits, keeping each vulnerable/fixed pair together.

    Pairs are stratified by their CWE label. Split sizes are allocated by
    rounding cumulative targets across strata, so every label's share of a
    split stays within one sample of the requested ratio and the overall
    counts round exactly. The result keeps the input order.
    """
    if not records:
        raise ValueError("cannot split an empty record list")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative fractions summing to 1, got {ratios}")

    units: dict[str, list[int]] = defaultdict(list)
    for i, rec in enumerate(records):
        units[rec.pair_id or rec.id].append(i)
    strata: dict[int, list[str]] = defaultdict(list)
    for key in sorted(units):
        strata[max(records[i].label for i in units[key])].append(key)

    rng = random.Random(seed)
    r_train, r_val, _ = ratios
    assignment: dict[str, Split] = {}
    before = 0
    for label in sorted(strata):
        keys = strata[label]
        rng.shuffle(keys)
        after = before + len(keys)
        n_train = _round_half_up(r_train * after) - _round_half_up(r_train * before)
        n_val = _round_half_up(r_val * after) - _round_half_up(r_val * before)
        n_val = min(n_val, len(keys) - n_train)
        for j, key in enumerate(keys):
            if j < n_train:
                assignment[key] = Split.TRAIN
            elif j < n_train + n_val:
                assignment[key] = Split.VAL
            else:
                assignment[key] = Split.TEST
        before = after

    return [replace(rec, split=assignment[rec.pair_id or rec.id]) for rec in records]


def record_to_json(rec: CleanRecord) -> str:
    return json.dumps(
        {"id": rec.id, "text": rec.text, "label": rec.label, "split": rec.split.value, "pair_id": rec.pair_id},
        ensure_ascii=False,
        sort_keys=True,
    )


def record_from_json(line: str) -> CleanRecord:
    obj = json.loads(line)
    label = obj["label"]
    if not isinstance(label, int) or not 0 <= label < N_CLASSES:
        raise ValueError(f"label out of range: {label!r}")
    if not isinstance(obj["text"], str) or not isinstance(obj["id"], str):
        raise ValueError("id and text must be strings")
    return CleanRecord(
        id=obj["id"],
        text=obj["text"],
        label=label,
        split=Split(obj["split"]),
        pair_id=obj.get("pair_id", ""),
    )


def write_dataset(records: list[CleanRecord], path: str | os.PathLike) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(record_to_json(rec) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset {path}: {exc.strerror}") from exc


def read_dataset(path: str | os.PathLike) -> list[CleanRecord]:
    records = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read dataset {path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                records.append(record_from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise DatasetFormatError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return records
