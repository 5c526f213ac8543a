"""Binary checkpoint files: config, label tags, then named float64 tensors."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from vulnscan.models.config import ModelConfig
from vulnscan.numcore import Tensor

HEADER = b"vulnscan-ckpt v1\n"


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    params: dict[str, Tensor]
    labels: tuple[str, ...] = field(default=())

    def to_bytes(self) -> bytes:
        parts = [HEADER, self.config.to_json().encode() + b"\n"]
        parts.append(json.dumps(list(self.labels)).encode() + b"\n")
        parts.append(f"tensors {len(self.params)}\n".encode())
        for name in sorted(self.params):
            arr = self.params[name].data
            dims = ",".join(str(n) for n in arr.shape)
            parts.append(f"{name}\t{dims}\n".encode())
            parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        return b"".join(parts)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes, config: ModelConfig | None = None, n_labels: int | None = None) -> "Checkpoint":
        if not blob.startswith(HEADER):
            raise CheckpointError("not a vulnscan checkpoint")
        pos = len(HEADER)

        def line() -> str:
            nonlocal pos
            end = blob.find(b"\n", pos)
            if end < 0:
                raise CheckpointError("truncated checkpoint")
            text = blob[pos:end].decode()
            pos = end + 1
            return text

        try:
            stored = ModelConfig.from_json(line())
            labels = tuple(json.loads(line()))
            tag, count = line().split(" ")
            if tag != "tensors":
                raise CheckpointError("checkpoint: tensor section missing")
            params = {}
            for _ in range(int(count)):
                name, dims = line().split("\t")
                shape = tuple(int(n) for n in dims.split(",")) if dims else ()
                nbytes = 8 * int(np.prod(shape, dtype=np.int64))
                if pos + nbytes > len(blob):
                    raise CheckpointError(f"checkpoint: tensor {name} is truncated")
                arr = np.frombuffer(blob, dtype="<f8", count=nbytes // 8, offset=pos).reshape(shape)
                pos += nbytes
                params[name] = Tensor(arr.astype(np.float64), requires_grad=True)
        except (ValueError, TypeError, KeyError) as exc:
            if isinstance(exc, CheckpointError):
                raise
            raise CheckpointError(f"malformed checkpoint: {exc}") from exc
        if config is not None and config != stored:
            raise CheckpointError(f"checkpoint config {stored} does not match expected {config}")
        if n_labels is not None and n_labels != stored.n_classes:
            raise CheckpointError(f"checkpoint has {stored.n_classes} classes, label map has {n_labels}")
        if labels and len(labels) != stored.n_classes:
            raise CheckpointError("checkpoint label list does not match its class count")
        for name, t in params.items():
            if not np.all(np.isfinite(t.data)):
                raise CheckpointError(f"checkpoint tensor {name} is not finite")
        return cls(stored, params, labels)

    @classmethod
    def load(cls, path: str | os.PathLike, config: ModelConfig | None = None, n_labels: int | None = None) -> "Checkpoint":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), config, n_labels)
