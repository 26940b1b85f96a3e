from __future__ import annotations

import numpy as np

from ..data.bpe import DataError
from ..numerics.tensor import Tensor, make_result


def smoothing_targets(targets: np.ndarray, vocab_size: int, eps: float, pe_allowed: np.ndarray, pad_id: int | None):
    """Target distributions: gold gets ``1 - eps``, the other allowed non-PAD tokens share ``eps``."""
    support = np.asarray(pe_allowed, bool).copy()
    if pad_id is not None:
        support[pad_id] = False
    k = int(support.sum())
    q = np.zeros(targets.shape + (vocab_size,))
    if k > 1:
        q[..., support] = eps / (k - 1)
        gold_mass = 1.0 - eps
    else:
        gold_mass = 1.0
    np.put_along_axis(q, targets[..., None], gold_mass, axis=-1)
    return q


def smoothed_loss(
    logits: Tensor,
    targets: np.ndarray,
    eps: float,
    pe_allowed: np.ndarray,
    pad_id: int | None = 0,
) -> Tensor:
    """Label-smoothed cross entropy averaged over non-PAD target positions.

    Tokens outside ``pe_allowed`` receive no smoothing mass.
    """
    targets = np.asarray(targets)
    allowed = np.asarray(pe_allowed, bool)
    valid = np.ones(targets.shape, bool) if pad_id is None else targets != pad_id
    if not allowed[targets[valid]].all():
        bad = sorted(set(targets[valid][~allowed[targets[valid]]].tolist()))
        raise DataError(f"gold tokens {bad[:5]} are not allowed in post-edits")
    n = int(valid.sum())
    if n == 0:
        raise DataError("smoothed_loss: no non-PAD targets")

    z = logits.data.astype(np.float64) - logits.data.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    q = smoothing_targets(np.where(valid, targets, 0), logits.shape[-1], eps, allowed, pad_id)
    q[~valid] = 0.0
    # q is exactly zero wherever logp is ~-1e32
    loss = -(q * np.where(q > 0, logp, 0.0)).sum() / n

    def backward(g):
        p = np.exp(logp)
        grad = (p - q) * valid[..., None] * (float(g) / n)
        logits._accumulate(grad.astype(logits.dtype, copy=False))

    return make_result(np.asarray(loss, dtype=logits.dtype), (logits,), backward)


def joint_loss(loss_ape, loss_denoise, lam: float):
    """Convex combination ``lam * loss_ape + (1 - lam) * loss_denoise``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    return loss_ape * lam + loss_denoise * (1.0 - lam)
