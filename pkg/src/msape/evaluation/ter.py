"""Translation edit rate with greedy block shifts.

Edits are insertions, deletions, substitutions and block shifts, each of
cost 1. Shifts are chosen greedily: at every round the single shift that
most reduces the remaining edit distance is applied, until none helps.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .. import _accel
from ..data.bpe import DataError
from .bleu import check_aligned

MAX_BLOCK = 10


def _ids(hyp: Sequence[str], ref: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    table: dict[str, int] = {}
    h = np.array([table.setdefault(w, len(table)) for w in hyp], dtype=np.int64)
    r = np.array([table.setdefault(w, len(table)) for w in ref], dtype=np.int64)
    return h, r


def alignment(hyp: np.ndarray, ref: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    """Edit distance plus flags marking hypothesis/reference words aligned as exact matches."""
    d = _accel.edit_matrix(hyp, ref)
    hyp_ok = np.zeros(len(hyp), dtype=np.bool_)
    ref_ok = np.zeros(len(ref), dtype=np.bool_)
    i, j = len(hyp), len(ref)
    while i > 0 or j > 0:
        if i > 0 and j > 0 and hyp[i - 1] == ref[j - 1] and d[i, j] == d[i - 1, j - 1]:
            hyp_ok[i - 1] = ref_ok[j - 1] = True
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + 1:
            i, j = i - 1, j - 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            i -= 1
        else:
            j -= 1
    return int(d[len(hyp), len(ref)]), hyp_ok, ref_ok


def sentence_edits(hyp: Sequence[str], ref: Sequence[str], shifts: bool = True) -> tuple[int, int]:
    """Return ``(edits, shift_count)`` turning ``hyp`` into ``ref``."""
    h, r = _ids(hyp, ref)
    if not shifts:
        return int(_accel.edit_distance(h, r)), 0
    n_shifts = 0
    while True:
        base, hyp_ok, ref_ok = alignment(h, r)
        if base == 0 or len(h) < 2:
            return base + n_shifts, n_shifts
        gain, start, length, target = _accel.best_shift(h, r, hyp_ok, ref_ok, base, MAX_BLOCK)
        if gain <= 0:
            return base + n_shifts, n_shifts
        rest = np.concatenate((h[:start], h[start + length :]))
        h = np.concatenate((rest[:target], h[start : start + length], rest[target:]))
        n_shifts += 1


def ter(hyps: Sequence[str], refs: Sequence[str], shifts: bool = True) -> dict:
    """Corpus TER: total edits over total reference words, as a percentage."""
    check_aligned(hyps, refs)
    total_edits = total_ref = total_shifts = 0
    for n, (h, r) in enumerate(zip(hyps, refs), start=1):
        ref = r.split()
        if not ref:
            raise DataError(f"empty reference on line {n}")
        edits, k = sentence_edits(h.split(), ref, shifts)
        total_edits += edits
        total_shifts += k
        total_ref += len(ref)
    return {
        "ter": 100.0 * total_edits / total_ref if total_ref else 0.0,
        "edits": total_edits,
        "shifts": total_shifts,
        "ref_len": total_ref,
    }
