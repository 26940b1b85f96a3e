"""Differentiable operations on :class:`Tensor`.

Each op computes its forward value with numpy and, when any input requires
gradients, records a closure that pushes the output gradient to its inputs.
"""

from __future__ import annotations

import math

import numpy as np

from .tensor import Tensor, as_tensor, make_result

# additive penalty for masked attention scores; finite so fully-masked rows cannot NaN
MASK_VALUE = -1e30


class DimensionError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _push(t: Tensor, g: np.ndarray) -> None:
    if t.requires_grad:
        t._accumulate(unbroadcast(g, t.shape))


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _push(a, g)
        _push(b, g)

    return make_result(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g):
        _push(a, g)
        _push(b, -g)

    return make_result(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        c = b

        def backward_scalar(g):
            _push(a, g * c)

        return make_result(a.data * c, (a,), backward_scalar)

    def backward(g):
        _push(a, g * b.data)
        _push(b, g * a.data)

    return make_result(a.data * b.data, (a, b), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product over the trailing two dimensions."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}")
    try:
        out = a.data @ b.data
    except ValueError as exc:
        raise DimensionError(f"matmul: cannot multiply shapes {a.shape} and {b.shape}") from exc

    def backward(g):
        if a.requires_grad:
            _push(a, g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            _push(b, np.swapaxes(a.data, -1, -2) @ g)

    return make_result(out, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """``x @ weight + bias`` with weight stored as [in, out]."""
    if x.shape[-1] != weight.shape[0]:
        raise DimensionError(f"linear: input {x.shape} does not match weight {weight.shape}")
    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data
    parents = (x, weight) if bias is None else (x, weight, bias)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g @ weight.data.T)
        g2 = g.reshape(-1, g.shape[-1])
        if weight.requires_grad:
            weight._accumulate(x.data.reshape(-1, x.shape[-1]).T @ g2)
        if bias is not None and bias.requires_grad:
            bias._accumulate(g2.sum(axis=0))

    return make_result(out, parents, backward)


def reshape(x: Tensor, shape) -> Tensor:
    def backward(g):
        x._accumulate(g.reshape(x.shape))

    return make_result(x.data.reshape(shape), (x,), backward)


def transpose(x: Tensor, axes) -> Tensor:
    inverse = np.argsort(axes)

    def backward(g):
        x._accumulate(np.transpose(g, inverse))

    return make_result(np.transpose(x.data, axes), (x,), backward)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape).copy())

    return make_result(np.sum(x.data, axis=axis, keepdims=keepdims), (x,), backward)


def mean(x: Tensor) -> Tensor:
    return mul(sum(x), 1.0 / x.data.size)


def relu(x: Tensor) -> Tensor:
    keep = x.data > 0

    def backward(g):
        x._accumulate(g * keep)

    return make_result(x.data * keep, (x,), backward)


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)

    def backward(g):
        x._accumulate(g * out)

    return make_result(out, (x,), backward)


def log(x: Tensor) -> Tensor:
    def backward(g):
        x._accumulate(g / x.data)

    return make_result(np.log(x.data), (x,), backward)


def _softmax(z: np.ndarray, axis: int) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax; ``-inf`` entries map to probability 0."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise DimensionError(f"softmax: axis {axis} invalid for shape {x.shape}")
    p = _softmax(x.data, axis)

    def backward(g):
        x._accumulate(p * (g - np.sum(g * p, axis=axis, keepdims=True)))

    return make_result(p, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - np.max(x.data, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(z), axis=axis, keepdims=True))
    out = z - lse

    def backward(g):
        p = np.exp(out)
        x._accumulate(g - p * np.sum(g, axis=axis, keepdims=True))

    return make_result(out, (x,), backward)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalise over the last dimension, then scale and shift."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise DimensionError(f"layer_norm: gain {gain.shape} / bias {bias.shape} vs input {x.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        if gain.requires_grad:
            gain._accumulate((g * xhat).sum(axis=lead))
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=lead))
        if x.requires_grad:
            gx = g * gain.data
            x._accumulate(
                inv * (gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True))
            )

    return make_result(out, (x, gain, bias), backward)


def dropout(x: Tensor, p: float, training: bool, rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout. Identity (the same object) outside training or at p=0."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must lie in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs a random generator")
    scale = (rng.random(x.shape) >= p) / (1.0 - p)
    scale = scale.astype(x.dtype, copy=False)

    def backward(g):
        x._accumulate(g * scale)

    return make_result(x.data * scale, (x,), backward)


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``weight[ids]``; gradients scatter-add back into the table."""
    ids = np.asarray(ids)

    def backward(g):
        full = np.zeros_like(weight.data)
        np.add.at(full, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        weight._accumulate(full)

    return make_result(weight.data[ids], (weight,), backward)


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """``softmax(q kᵀ / sqrt(d_h) + mask) v`` over the trailing two dims.

    ``mask`` is boolean and broadcastable to the score matrix; False entries
    are excluded from the softmax.
    """
    if q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"attention: q {q.shape}, k {k.shape}, v {v.shape} are not conformable")
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = (q.data @ np.swapaxes(k.data, -1, -2)) * scale
    if mask is not None:
        scores = np.where(mask, scores, MASK_VALUE)
    p = _softmax(scores, -1)
    out = p @ v.data

    def backward(g):
        if v.requires_grad:
            _push(v, np.swapaxes(p, -1, -2) @ g)
        dp = g @ np.swapaxes(v.data, -1, -2)
        ds = p * (dp - np.sum(dp * p, axis=-1, keepdims=True)) * scale
        if q.requires_grad:
            _push(q, ds @ k.data)
        if k.requires_grad:
            _push(k, np.swapaxes(ds, -1, -2) @ q.data)

    return make_result(out, (q, k, v), backward)
