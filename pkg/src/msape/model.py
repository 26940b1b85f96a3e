"""Multi-source transformer for automatic post-editing.

Three stacks share one token embedding:

* source encoder: self-attention + FFN per layer;
* MT encoder: self-attention over the MT output, cross-attention to the
  encoded source, FFN;
* decoder: causal self-attention, cross-attention to the source, then to the
  MT encoding, FFN.

Every sublayer is post-norm residual, ``LayerNorm(x + Dropout(f(x)))``. The
output classifier reuses the embedding matrix as its weight; its bias is
pinned to ``BIAS_MASK`` for tokens that never occur in post-edits.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .numerics import ops
from .numerics.ops import ConfigError, DimensionError
from .numerics.tensor import Tensor

BIAS_MASK = -1e32


class PairingError(ValueError):
    pass


class VocabularyRangeError(IndexError):
    pass


@dataclass
class ModelConfig:
    vocab_size: int
    n_layers: int = 6
    d_model: int = 512
    d_ffn: int = 2048
    n_heads: int = 8
    dropout: float = 0.1
    max_positions: int = 1024
    dtype: str = "float32"
    ln_eps: float = 1e-6

    def __post_init__(self):
        if self.n_layers < 0:
            raise ConfigError("n_layers must be non-negative")
        for name in ("vocab_size", "d_model", "d_ffn", "n_heads", "max_positions"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class NoiseConfig:
    strength: float = 0.2
    distribution: str = "gaussian"

    def __post_init__(self):
        if not self.strength >= 0.0:
            raise ConfigError(f"noise strength must be >= 0, got {self.strength}")
        if self.distribution not in ("gaussian", "uniform"):
            raise ConfigError(f"unknown noise distribution {self.distribution!r}")


def positional_encoding(n_positions: int, d_model: int) -> np.ndarray:
    """Sinusoidal table: sin on even dimensions, cos on odd ones."""
    pos = np.arange(n_positions, dtype=np.float64)[:, None]
    i = np.arange(0, d_model, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, i / d_model)
    table = np.zeros((n_positions, d_model))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle[:, : d_model // 2])
    return table


def inject_noise(
    combined: Tensor,
    cfg: NoiseConfig,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> Tensor:
    """Adaptive embedding noise: ``emb + strength * mean(|emb|) * N``.

    The scale ``mean(|emb|)`` is taken over every element of ``combined`` and
    treated as a constant, so gradients pass straight through. ``noise``
    overrides sampling of ``N``.
    """
    if cfg.strength < 0:
        raise ConfigError(f"noise strength must be >= 0, got {cfg.strength}")
    if cfg.strength == 0:
        return combined
    if noise is None:
        if rng is None:
            raise ConfigError("inject_noise needs a random generator")
        if cfg.distribution == "gaussian":
            noise = rng.standard_normal(combined.shape)
        else:
            noise = rng.uniform(-1.0, 1.0, combined.shape)
    m = float(np.mean(np.abs(combined.data)))
    return ops.add(combined, (cfg.strength * m * np.asarray(noise)).astype(combined.dtype, copy=False))


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Transformer:
    """Parameters plus the forward computations of the multi-source model."""

    def __init__(self, config: ModelConfig, pe_allowed: np.ndarray | None = None, seed: int = 0):
        self.config = config
        dtype = np.dtype(config.dtype)
        allowed = np.ones(config.vocab_size, dtype=bool) if pe_allowed is None else np.asarray(pe_allowed, bool)
        if allowed.shape != (config.vocab_size,):
            raise ConfigError("pe_allowed must have one entry per vocabulary item")
        self.pe_allowed = allowed
        self.params: dict[str, Tensor] = {}
        self._pos = positional_encoding(config.max_positions, config.d_model).astype(dtype)
        rng = np.random.default_rng(seed)
        d, f, v = config.d_model, config.d_ffn, config.vocab_size

        def add(name, value):
            self.params[name] = Tensor(np.asarray(value, dtype=dtype), requires_grad=True, name=name)

        add("embed.weight", _glorot(rng, v, d))
        add("classifier.bias", np.zeros(v))

        def attention(prefix):
            for p in "qkvo":
                add(f"{prefix}.w{p}", _glorot(rng, d, d))
                add(f"{prefix}.b{p}", np.zeros(d))
            add(f"{prefix}.ln.gain", np.ones(d))
            add(f"{prefix}.ln.bias", np.zeros(d))

        def ffn(prefix):
            add(f"{prefix}.w1", _glorot(rng, d, f))
            add(f"{prefix}.b1", np.zeros(f))
            add(f"{prefix}.w2", _glorot(rng, f, d))
            add(f"{prefix}.b2", np.zeros(d))
            add(f"{prefix}.ln.gain", np.ones(d))
            add(f"{prefix}.ln.bias", np.zeros(d))

        for i in range(config.n_layers):
            attention(f"src.{i}.self")
            ffn(f"src.{i}.ffn")
        for i in range(config.n_layers):
            attention(f"mt.{i}.self")
            attention(f"mt.{i}.cross")
            ffn(f"mt.{i}.ffn")
        for i in range(config.n_layers):
            attention(f"dec.{i}.self")
            attention(f"dec.{i}.src")
            attention(f"dec.{i}.mt")
            ffn(f"dec.{i}.ffn")
        self.apply_bias_mask()

    @property
    def embedding(self) -> Tensor:
        return self.params["embed.weight"]

    def apply_bias_mask(self) -> None:
        self.params["classifier.bias"].data[~self.pe_allowed] = BIAS_MASK

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def num_parameters(self) -> int:
        return sum(p.data.size for p in self.params.values())

    # embeddings

    def combined_embedding(self, ids: np.ndarray) -> Tensor:
        """Token embedding times sqrt(d_model) plus sinusoidal position."""
        ids = np.asarray(ids)
        cfg = self.config
        if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
            raise VocabularyRangeError(f"token id out of range for vocabulary of size {cfg.vocab_size}")
        if ids.shape[-1] > cfg.max_positions:
            raise DimensionError(f"sequence length {ids.shape[-1]} exceeds max_positions={cfg.max_positions}")
        emb = ops.mul(ops.embedding(self.embedding, ids), math.sqrt(cfg.d_model))
        return ops.add(emb, self._pos[: ids.shape[-1]])

    def embed(self, ids: np.ndarray, training: bool = False, rng=None) -> Tensor:
        return ops.dropout(self.combined_embedding(ids), self.config.dropout, training, rng)

    # building blocks

    def _attend(self, prefix: str, xq: Tensor, xkv: Tensor, mask: np.ndarray) -> Tensor:
        p = self.params
        b, lq, d = xq.shape
        lk = xkv.shape[1]
        h = self.config.n_heads
        dh = d // h

        def heads(x, w, bias, length):
            return ops.transpose(ops.reshape(ops.linear(x, p[w], p[bias]), (b, length, h, dh)), (0, 2, 1, 3))

        q = heads(xq, f"{prefix}.wq", f"{prefix}.bq", lq)
        k = heads(xkv, f"{prefix}.wk", f"{prefix}.bk", lk)
        v = heads(xkv, f"{prefix}.wv", f"{prefix}.bv", lk)
        ctx = ops.scaled_dot_attention(q, k, v, mask)
        ctx = ops.reshape(ops.transpose(ctx, (0, 2, 1, 3)), (b, lq, d))
        return ops.linear(ctx, p[f"{prefix}.wo"], p[f"{prefix}.bo"])

    def _residual(self, prefix: str, x: Tensor, y: Tensor, training: bool, rng) -> Tensor:
        p = self.params
        y = ops.dropout(y, self.config.dropout, training, rng)
        return ops.layer_norm(ops.add(x, y), p[f"{prefix}.ln.gain"], p[f"{prefix}.ln.bias"], self.config.ln_eps)

    def _attention_sublayer(self, prefix, x, kv, mask, training, rng):
        return self._residual(prefix, x, self._attend(prefix, x, kv, mask), training, rng)

    def _ffn_sublayer(self, prefix, x, training, rng):
        p = self.params
        hidden = ops.relu(ops.linear(x, p[f"{prefix}.w1"], p[f"{prefix}.b1"]))
        hidden = ops.dropout(hidden, self.config.dropout, training, rng)
        return self._residual(prefix, x, ops.linear(hidden, p[f"{prefix}.w2"], p[f"{prefix}.b2"]), training, rng)

    @staticmethod
    def key_mask(pad: np.ndarray) -> np.ndarray:
        """[B, L] padding flags -> [B, 1, 1, L] keep-mask over attention keys."""
        return ~np.asarray(pad, bool)[:, None, None, :]

    # stacks

    def encode_source(self, src: np.ndarray, src_pad: np.ndarray, training: bool = False, rng=None) -> Tensor:
        x = self.embed(src, training, rng)
        mask = self.key_mask(src_pad)
        for i in range(self.config.n_layers):
            x = self._attention_sublayer(f"src.{i}.self", x, x, mask, training, rng)
            x = self._ffn_sublayer(f"src.{i}.ffn", x, training, rng)
        return x

    def encode_mt(
        self,
        mt: np.ndarray | Tensor,
        mt_pad: np.ndarray,
        src_repr: Tensor,
        src_pad: np.ndarray,
        training: bool = False,
        rng=None,
    ) -> Tensor:
        """Encode MT ids (or an already embedded tensor) while attending to the source."""
        x = mt if isinstance(mt, Tensor) else self.embed(mt, training, rng)
        if x.shape[0] != src_repr.shape[0]:
            raise PairingError(f"MT batch of {x.shape[0]} does not pair with source batch of {src_repr.shape[0]}")
        self_mask = self.key_mask(mt_pad)
        src_mask = self.key_mask(src_pad)
        for i in range(self.config.n_layers):
            x = self._attention_sublayer(f"mt.{i}.self", x, x, self_mask, training, rng)
            x = self._attention_sublayer(f"mt.{i}.cross", x, src_repr, src_mask, training, rng)
            x = self._ffn_sublayer(f"mt.{i}.ffn", x, training, rng)
        return x

    def decode_states(
        self,
        prefix: np.ndarray,
        src_repr: Tensor,
        src_pad: np.ndarray,
        mt_repr: Tensor,
        mt_pad: np.ndarray,
        training: bool = False,
        rng=None,
    ) -> Tensor:
        prefix = np.asarray(prefix)
        n = prefix.shape[1]
        # padding sits after every real token, so the causal mask already hides it
        self_mask = np.tril(np.ones((n, n), dtype=bool))[None, None]
        src_mask = self.key_mask(src_pad)
        mt_mask = self.key_mask(mt_pad)
        x = self.embed(prefix, training, rng)
        for i in range(self.config.n_layers):
            x = self._attention_sublayer(f"dec.{i}.self", x, x, self_mask, training, rng)
            x = self._attention_sublayer(f"dec.{i}.src", x, src_repr, src_mask, training, rng)
            x = self._attention_sublayer(f"dec.{i}.mt", x, mt_repr, mt_mask, training, rng)
            x = self._ffn_sublayer(f"dec.{i}.ffn", x, training, rng)
        return x

    def logits(self, states: Tensor) -> Tensor:
        """Tied classifier: ``states @ Eᵀ + bias``."""
        if states.shape[-1] != self.config.d_model:
            raise DimensionError(f"decoder states {states.shape} do not end in d_model={self.config.d_model}")
        return ops.linear(states, ops.transpose(self.embedding, (1, 0)), self.params["classifier.bias"])

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self.params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        if missing:
            raise KeyError(f"checkpoint lacks parameters: {sorted(missing)[:5]}")
        for k, p in self.params.items():
            value = np.asarray(state[k])
            if value.shape != p.shape:
                raise DimensionError(f"parameter {k}: checkpoint shape {value.shape} vs model {p.shape}")
            p.data = value.astype(p.dtype, copy=True)
        self.apply_bias_mask()
