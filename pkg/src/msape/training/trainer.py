"""Joint APE + de-noising training."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np

from ..data.corpus import Batch, Triple, make_batches
from ..model import ModelConfig, NoiseConfig, Transformer, inject_noise
from ..numerics import ops
from ..numerics.tensor import Tensor, no_grad
from .checkpoint import Checkpoint, CheckpointStore
from .loss import joint_loss, smoothed_loss
from .optim import AdamState, adam_update, lr_at

log = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    """Model and optimisation settings; defaults are the full-scale values."""

    # model
    n_layers: int = 6
    d_model: int = 512
    d_ffn: int = 2048
    n_heads: int = 8
    dropout: float = 0.1
    max_positions: int = 1024
    dtype: str = "float32"
    # objective
    label_smoothing: float = 0.1
    lam: float = 0.5
    noise_strength: float = 0.2
    noise_distribution: str = "gaussian"
    # optimiser
    adam_beta1: float = 0.9
    adam_beta2: float = 0.98
    adam_eps: float = 1e-9
    warmup_steps: int = 8000
    lr_scale: float = 1.0
    # schedule / bookkeeping
    epochs: int = 8
    max_steps: int = 0
    batch_pe_tokens: int = 25000
    save_interval: int = 1500
    keep_last: int = 20
    average_window: int = 5
    seed: int = 1

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError(f"label_smoothing must lie in [0, 1), got {self.label_smoothing}")
        for name in ("warmup_steps", "epochs", "batch_pe_tokens", "save_interval", "keep_last", "average_window"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        NoiseConfig(self.noise_strength, self.noise_distribution)

    @property
    def noise(self) -> NoiseConfig:
        return NoiseConfig(self.noise_strength, self.noise_distribution)

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            n_layers=self.n_layers,
            d_model=self.d_model,
            d_ffn=self.d_ffn,
            n_heads=self.n_heads,
            dropout=self.dropout,
            max_positions=self.max_positions,
            dtype=self.dtype,
        )

    def digest(self) -> str:
        blob = json.dumps(dataclasses.asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_file(cls, path: str | os.PathLike, overrides: dict | None = None) -> "TrainConfig":
        """Read ``key=value`` lines (``#`` starts a comment); ``overrides`` win."""
        values: dict[str, str] = {}
        with open(path, encoding="utf-8") as f:
            for n, line in enumerate(f, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{n}: expected key=value")
                key, value = (s.strip() for s in line.split("=", 1))
                values[key] = value
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values: dict) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
            default = known[key].default
            kwargs[key] = value if not isinstance(value, str) else type(default)(value)
        return cls(**kwargs)

    def to_file(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for k, v in dataclasses.asdict(self).items():
                f.write(f"{k}={v}\n")


def batch_loss(
    model: Transformer,
    batch: Batch,
    task: str,
    eps: float,
    noise=None,
    training: bool = True,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Per-token loss of one pass.

    ``task="ape"`` feeds (src, mt) to the encoders; ``task="denoise"`` feeds
    (src, noised pe). Both predict pe.
    """
    src_repr = model.encode_source(batch.src, batch.src_pad, training, rng)
    if task == "ape":
        mt_in, mt_pad = batch.mt, batch.mt_pad
    elif task == "denoise":
        combined = model.combined_embedding(batch.pe)
        if training and noise is not None:
            combined = inject_noise(combined, noise, rng)
        mt_in = ops.dropout(combined, model.config.dropout, training, rng)
        mt_pad = batch.pe_pad
    else:
        raise ValueError(f"unknown task {task!r}")
    mt_repr = model.encode_mt(mt_in, mt_pad, src_repr, batch.src_pad, training, rng)
    states = model.decode_states(batch.pe[:, :-1], src_repr, batch.src_pad, mt_repr, mt_pad, training, rng)
    return smoothed_loss(model.logits(states), batch.pe[:, 1:], eps, model.pe_allowed, pad_id=0)


class Trainer:
    def __init__(self, model: Transformer, cfg: TrainConfig):
        self.model = model
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.opt = AdamState()

    @property
    def step(self) -> int:
        return self.opt.step

    def joint_objective(self, batch: Batch) -> tuple[Tensor, float, float]:
        """Build the joint loss graph; passes with zero weight are never built."""
        cfg = self.cfg
        la = ld = None
        if cfg.lam > 0.0:
            la = batch_loss(self.model, batch, "ape", cfg.label_smoothing, training=True, rng=self.rng)
        if cfg.lam < 1.0:
            ld = batch_loss(self.model, batch, "denoise", cfg.label_smoothing, cfg.noise, training=True, rng=self.rng)
        if la is None:
            total = ld * 1.0
        elif ld is None:
            total = la * 1.0
        else:
            total = joint_loss(la, ld, cfg.lam)
        return total, (la.item() if la is not None else math.nan), (ld.item() if ld is not None else math.nan)

    def train_step(self, batch: Batch) -> dict:
        model, cfg = self.model, self.cfg
        model.zero_grad()
        total, la, ld = self.joint_objective(batch)
        value = total.item()
        if not math.isfinite(value):
            raise DivergenceError(
                f"non-finite loss at step {self.step + 1}: joint={value}, ape={la}, denoise={ld}, batch={len(batch)}"
            )
        total.backward()
        lr = lr_at(self.step + 1, cfg.d_model, cfg.warmup_steps, cfg.lr_scale)
        grads = {k: p.grad for k, p in model.params.items() if p.grad is not None}
        adam_update(model.params, grads, self.opt, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)
        model.apply_bias_mask()
        model.zero_grad()
        return {"step": self.step, "lr": lr, "loss_ape": la, "loss_dn": ld, "joint": value}

    def checkpoint(self, epoch: int = 0) -> Checkpoint:
        meta = {
            "config_digest": self.cfg.digest(),
            "model_config": self.model.config.to_dict(),
        }
        tensors = {k: v.copy() for k, v in self.model.state_dict().items()}
        tensors["pe_allowed"] = self.model.pe_allowed.astype(np.uint8)
        return Checkpoint(tensors, self.step, epoch, meta)

    def fit(
        self,
        triples: Sequence[Triple],
        store: CheckpointStore | None = None,
        dev: Sequence[Triple] | None = None,
        loss_log: str | os.PathLike | None = None,
        on_step: Callable[[dict], None] | None = None,
    ) -> list[dict]:
        """Run the epoch loop; returns one averaged report per save interval."""
        cfg = self.cfg
        reports, window = [], []
        log_file = open(loss_log, "w", encoding="utf-8") if loss_log else None
        try:
            if log_file:
                log_file.write("step\tlr\tloss_ape\tloss_dn\tjoint\n")
            for epoch in range(cfg.epochs):
                for batch in make_batches(triples, cfg.batch_pe_tokens, seed=cfg.seed * 1000 + epoch):
                    report = self.train_step(batch)
                    window.append(report)
                    if on_step:
                        on_step(report)
                    if self.step % cfg.save_interval == 0:
                        summary = {
                            "step": self.step,
                            "lr": report["lr"],
                            **{k: float(np.mean([r[k] for r in window])) for k in ("loss_ape", "loss_dn", "joint")},
                        }
                        window = []
                        reports.append(summary)
                        log.info("step %d lr %.3g joint %.4f", summary["step"], summary["lr"], summary["joint"])
                        if log_file:
                            log_file.write(
                                "{step}\t{lr:.6g}\t{loss_ape:.6f}\t{loss_dn:.6f}\t{joint:.6f}\n".format(**summary)
                            )
                            log_file.flush()
                        if store is not None:
                            store.save(self.checkpoint(epoch))
                    if cfg.max_steps and self.step >= cfg.max_steps:
                        break
                if store is not None and dev:
                    ppl = validation_perplexity(self.model, dev)
                    if store.update_best(self.checkpoint(epoch), ppl):
                        log.info("epoch %d: new best validation perplexity %.3f", epoch, ppl)
                if cfg.max_steps and self.step >= cfg.max_steps:
                    break
        finally:
            if log_file:
                log_file.close()
        return reports


def validation_perplexity(model: Transformer, dev: Sequence[Triple], batch_pe_tokens: int = 2000) -> float:
    """exp of the mean unsmoothed per-token NLL of pe given (src, mt); no noise, no dropout."""
    total, count = 0.0, 0
    with no_grad():
        for batch in make_batches(dev, batch_pe_tokens, shuffle=False):
            n = int((batch.pe[:, 1:] != 0).sum())
            total += batch_loss(model, batch, "ape", 0.0, training=False).item() * n
            count += n
    return math.exp(total / count)
