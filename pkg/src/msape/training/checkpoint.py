"""Checkpoint files, the rolling checkpoint store, and checkpoint averaging.

File layout (``#ckpt-v1``)::

    #ckpt-v1
    {"step": ..., "epoch": ..., "config_digest": ..., ...}     <- one JSON line
    tensor <name> <dtype> <d0,d1,...|-> <nbytes>
    <nbytes of little-endian raw data>
    ...
    end
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

HEADER = b"#ckpt-v1\n"

log = logging.getLogger(__name__)


class StorageError(OSError):
    pass


class CheckpointFormatError(ValueError):
    pass


@dataclass
class Checkpoint:
    tensors: dict[str, np.ndarray]
    step: int
    epoch: int = 0
    meta: dict = field(default_factory=dict)


def save_checkpoint(path: str | os.PathLike, ckpt: Checkpoint) -> None:
    meta = dict(ckpt.meta, step=int(ckpt.step), epoch=int(ckpt.epoch))
    tmp = Path(str(path) + ".tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(HEADER)
            f.write(json.dumps(meta, sort_keys=True).encode("utf-8") + b"\n")
            for name, arr in ckpt.tensors.items():
                if " " in name:
                    raise CheckpointFormatError(f"tensor name {name!r} contains a space")
                arr = np.ascontiguousarray(arr)
                arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
                raw = arr.tobytes()
                shape = ",".join(str(n) for n in arr.shape) or "-"
                f.write(f"tensor {name} {arr.dtype.str} {shape} {len(raw)}\n".encode("ascii"))
                f.write(raw)
            f.write(b"end\n")
        os.replace(tmp, path)
    except OSError as exc:
        raise StorageError(f"could not write checkpoint {path}: {exc}") from exc


def load_checkpoint(path: str | os.PathLike) -> Checkpoint:
    try:
        with open(path, "rb") as f:
            if f.readline() != HEADER:
                raise CheckpointFormatError(f"{path}: not a #ckpt-v1 file")
            meta = json.loads(f.readline())
            tensors = {}
            while True:
                line = f.readline().decode("ascii").split()
                if line == ["end"]:
                    break
                if len(line) != 5 or line[0] != "tensor":
                    raise CheckpointFormatError(f"{path}: malformed tensor record {line}")
                _, name, dtype, shape, nbytes = line
                dims = () if shape == "-" else tuple(int(n) for n in shape.split(","))
                raw = f.read(int(nbytes))
                if len(raw) != int(nbytes):
                    raise CheckpointFormatError(f"{path}: truncated tensor {name}")
                arr = np.frombuffer(raw, dtype=np.dtype(dtype)).reshape(dims)
                tensors[name] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    except OSError as exc:
        raise StorageError(f"could not read checkpoint {path}: {exc}") from exc
    step = meta.pop("step")
    epoch = meta.pop("epoch")
    return Checkpoint(tensors, step, epoch, meta)


class CheckpointStore:
    """Keeps the newest ``keep_last`` step checkpoints on disk plus the best-perplexity epoch model."""

    def __init__(self, directory: str | os.PathLike, keep_last: int = 20, save_interval: int | None = None):
        if keep_last < 1:
            raise ValueError("keep_last must be positive")
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.keep_last = keep_last
        self.save_interval = save_interval
        self.steps: list[int] = []
        self.best_perplexity: float | None = None
        for p in sorted(self.directory.glob("ckpt_*.ckpt")):
            self.steps.append(int(p.stem.split("_")[1]))
        self.steps.sort()

    def path_for(self, step: int) -> Path:
        return self.directory / f"ckpt_{step:08d}.ckpt"

    @property
    def best_path(self) -> Path:
        return self.directory / "best_epoch.ckpt"

    def save(self, ckpt: Checkpoint) -> Path:
        if self.save_interval and ckpt.step % self.save_interval:
            raise ValueError(f"step {ckpt.step} is not a multiple of save interval {self.save_interval}")
        if self.steps and ckpt.step <= self.steps[-1]:
            raise ValueError(f"checkpoint step {ckpt.step} does not follow {self.steps[-1]}")
        path = self.path_for(ckpt.step)
        save_checkpoint(path, ckpt)
        self.steps.append(ckpt.step)
        while len(self.steps) > self.keep_last:
            old = self.steps.pop(0)
            try:
                self.path_for(old).unlink()
            except OSError as exc:
                raise StorageError(f"could not evict checkpoint {old}: {exc}") from exc
        return path

    def update_best(self, ckpt: Checkpoint, perplexity: float) -> bool:
        """Replace the best epoch checkpoint if ``perplexity`` improves on it."""
        if self.best_perplexity is not None and perplexity >= self.best_perplexity:
            return False
        self.best_perplexity = perplexity
        save_checkpoint(self.best_path, Checkpoint(ckpt.tensors, ckpt.step, ckpt.epoch, dict(ckpt.meta, perplexity=perplexity)))
        return True

    def load_all(self) -> list[Checkpoint]:
        return [load_checkpoint(self.path_for(s)) for s in self.steps]


def average_tensors(checkpoints: list[Checkpoint]) -> dict[str, np.ndarray]:
    """Elementwise mean of floating-point tensors; other tensors are copied from the first."""
    first = checkpoints[0].tensors
    out = {}
    for name, arr in first.items():
        if not np.issubdtype(arr.dtype, np.floating):
            out[name] = arr.copy()
            continue
        acc = np.zeros(arr.shape, dtype=np.longdouble)
        for c in checkpoints:
            if c.tensors[name].shape != arr.shape:
                raise ValueError(f"tensor {name} changes shape across checkpoints")
            acc += c.tensors[name]
        out[name] = (acc / len(checkpoints)).astype(arr.dtype)
    return out


def average_checkpoints(checkpoints: list[Checkpoint], window: int = 5, expected: int = 20) -> list[Checkpoint]:
    """Average non-overlapping runs of ``window`` adjacent checkpoints in step order.

    With the full ``expected`` count this yields ``expected // window`` models;
    with fewer, only complete windows are used and a warning is logged.
    """
    ordered = sorted(checkpoints, key=lambda c: c.step)
    if len(ordered) < expected:
        log.warning("averaging %d checkpoints (expected %d); using complete windows only", len(ordered), expected)
    n = len(ordered) // window
    if n == 0:
        raise ValueError(f"need at least {window} checkpoints to average, got {len(ordered)}")
    # a partial window is dropped from the oldest end
    ordered = ordered[len(ordered) - n * window :]
    models = []
    for i in range(n):
        group = ordered[i * window : (i + 1) * window]
        last = group[-1]
        meta = dict(last.meta, averaged_steps=[c.step for c in group])
        models.append(Checkpoint(average_tensors(group), last.step, last.epoch, meta))
    return models


def model_from_checkpoint(ckpt: Checkpoint):
    """Rebuild a :class:`~msape.model.Transformer` from a saved checkpoint."""
    from ..model import ModelConfig, Transformer

    if "model_config" not in ckpt.meta:
        raise CheckpointFormatError("checkpoint carries no model_config metadata")
    cfg = ModelConfig(**ckpt.meta["model_config"])
    allowed = ckpt.tensors.get("pe_allowed")
    model = Transformer(cfg, None if allowed is None else allowed.astype(bool))
    model.load_state_dict({k: v for k, v in ckpt.tensors.items() if k != "pe_allowed"})
    return model
