"""Edit-distance kernels for TER, compiled with numba when available.

Set ``MSAPE_DISABLE_NUMBA=1`` to force the pure-numpy path. Both paths are
importable directly (``*_numpy`` / ``*_numba``) for tests and benchmarks.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("MSAPE_DISABLE_NUMBA", "").lower() not in ("1", "true", "yes")


def edit_matrix_numpy(hyp: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Full Levenshtein table; row ``i`` covers the first ``i`` hypothesis words."""
    n, m = len(hyp), len(ref)
    d = np.empty((n + 1, m + 1), dtype=np.int64)
    cols = np.arange(m + 1)
    d[0] = cols
    for i in range(1, n + 1):
        prev = d[i - 1]
        cand = np.empty(m + 1, dtype=np.int64)
        cand[0] = i
        cand[1:] = np.minimum(prev[:-1] + (ref != hyp[i - 1]), prev[1:] + 1)
        # insertions chain left to right: cur[j] = min_k (cand[k] + j - k)
        d[i] = np.minimum.accumulate(cand - cols) + cols
    return d


def edit_distance_numpy(hyp: np.ndarray, ref: np.ndarray) -> int:
    m = len(ref)
    cols = np.arange(m + 1)
    prev = cols.copy()
    cand = np.empty(m + 1, dtype=np.int64)
    for i in range(1, len(hyp) + 1):
        cand[0] = i
        cand[1:] = np.minimum(prev[:-1] + (ref != hyp[i - 1]), prev[1:] + 1)
        prev = np.minimum.accumulate(cand - cols) + cols
    return int(prev[m])


def _shifted(hyp, i, length, p):
    rest = np.concatenate((hyp[:i], hyp[i + length :]))
    return np.concatenate((rest[:p], hyp[i : i + length], rest[p:]))


def best_shift_numpy(hyp, ref, hyp_ok, ref_ok, base, max_block):
    """Search every block shift; returns ``(gain, start, length, target)``.

    A block qualifies if it occurs somewhere in the reference, contains at
    least one misaligned hypothesis word, and the matching reference span
    contains at least one unmatched word. Ties prefer longer blocks, then
    earlier starts, then earlier targets.
    """
    n, m = len(hyp), len(ref)
    best = (0, 0, 0, 0)
    found = False
    for length in range(1, min(max_block, n) + 1):
        for i in range(n - length + 1):
            if hyp_ok[i : i + length].all():
                continue
            block = hyp[i : i + length]
            ok = False
            for j in range(m - length + 1):
                if (ref[j : j + length] == block).all() and not ref_ok[j : j + length].all():
                    ok = True
                    break
            if not ok:
                continue
            for p in range(n - length + 1):
                if p == i:
                    continue
                gain = base - edit_distance_numpy(_shifted(hyp, i, length, p), ref)
                key = (gain, length, -i, -p)
                if not found or key > (best[0], best[2], -best[1], -best[3]):
                    best = (gain, i, length, p)
                    found = True
    return best


if HAVE_NUMBA:

    @numba.njit(cache=True)
    def edit_matrix_numba(hyp, ref):
        n, m = hyp.shape[0], ref.shape[0]
        d = np.empty((n + 1, m + 1), dtype=np.int64)
        for j in range(m + 1):
            d[0, j] = j
        for i in range(1, n + 1):
            d[i, 0] = i
            for j in range(1, m + 1):
                c = d[i - 1, j - 1] + (0 if hyp[i - 1] == ref[j - 1] else 1)
                if d[i - 1, j] + 1 < c:
                    c = d[i - 1, j] + 1
                if d[i, j - 1] + 1 < c:
                    c = d[i, j - 1] + 1
                d[i, j] = c
        return d

    @numba.njit(cache=True)
    def edit_distance_numba(hyp, ref):
        m = ref.shape[0]
        prev = np.arange(m + 1)
        cur = np.empty(m + 1, dtype=np.int64)
        for i in range(1, hyp.shape[0] + 1):
            cur[0] = i
            h = hyp[i - 1]
            for j in range(1, m + 1):
                c = prev[j - 1] + (0 if h == ref[j - 1] else 1)
                if prev[j] + 1 < c:
                    c = prev[j] + 1
                if cur[j - 1] + 1 < c:
                    c = cur[j - 1] + 1
                cur[j] = c
            prev, cur = cur, prev
        return prev[m]

    @numba.njit(cache=True)
    def best_shift_numba(hyp, ref, hyp_ok, ref_ok, base, max_block):
        n, m = hyp.shape[0], ref.shape[0]
        bg, bi, bl, bp = 0, 0, 0, 0
        found = False
        buf = np.empty(n, dtype=hyp.dtype)
        for length in range(1, min(max_block, n) + 1):
            for i in range(n - length + 1):
                all_ok = True
                for t in range(i, i + length):
                    if not hyp_ok[t]:
                        all_ok = False
                        break
                if all_ok:
                    continue
                ok = False
                for j in range(m - length + 1):
                    same = True
                    for t in range(length):
                        if ref[j + t] != hyp[i + t]:
                            same = False
                            break
                    if same:
                        for t in range(j, j + length):
                            if not ref_ok[t]:
                                ok = True
                                break
                    if ok:
                        break
                if not ok:
                    continue
                for p in range(n - length + 1):
                    if p == i:
                        continue
                    # rest = hyp without the block; insert block before rest[p]
                    k = 0
                    r = 0
                    for src in range(n):
                        if i <= src < i + length:
                            continue
                        if r == p:
                            for t in range(length):
                                buf[k] = hyp[i + t]
                                k += 1
                        buf[k] = hyp[src]
                        k += 1
                        r += 1
                    if r == p:
                        for t in range(length):
                            buf[k] = hyp[i + t]
                            k += 1
                    gain = base - edit_distance_numba(buf, ref)
                    better = False
                    if not found or gain > bg:
                        better = True
                    elif gain == bg:
                        if length > bl:
                            better = True
                        elif length == bl and (i < bi or (i == bi and p < bp)):
                            better = True
                    if better:
                        bg, bi, bl, bp = gain, i, length, p
                        found = True
        return bg, bi, bl, bp

else:  # pragma: no cover
    edit_matrix_numba = edit_distance_numba = best_shift_numba = None


if USE_NUMBA:
    edit_matrix = edit_matrix_numba
    edit_distance = edit_distance_numba
    best_shift = best_shift_numba
else:
    edit_matrix = edit_matrix_numpy
    edit_distance = edit_distance_numpy
    best_shift = best_shift_numpy
