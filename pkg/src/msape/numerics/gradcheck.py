from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


class EvaluationError(ArithmeticError):
    pass


def grad_check(
    f: Callable[[], Tensor],
    x: Tensor,
    h: float = 1e-5,
    indices: np.ndarray | None = None,
) -> float:
    """Worst relative error between reverse-mode and central-difference gradients.

    ``f`` is re-evaluated after perturbing ``x.data`` in place, so it must read
    ``x`` (and any other state) at call time. ``indices`` restricts the check
    to a subset of flat coordinates.
    """
    x.grad = None
    out = f()
    if not np.isfinite(out.data).all():
        raise EvaluationError("grad_check: f(x) is not finite")
    out.backward()
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

    flat = x.data.reshape(-1)
    coords = range(flat.size) if indices is None else indices
    worst = 0.0
    for i in coords:
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f().data)
        flat[i] = orig - h
        fm = float(f().data)
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"grad_check: f not finite near coordinate {i}")
        numeric = (fp - fm) / (2.0 * h)
        a = float(analytic.reshape(-1)[i])
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst
