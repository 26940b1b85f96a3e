"""Case-sensitive corpus BLEU in the multi-bleu style (no smoothing)."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from ..data.corpus import AlignmentError

MAX_ORDER = 4


def check_aligned(hyps: Sequence[str], *ref_streams: Sequence[str]) -> None:
    for refs in ref_streams:
        if len(refs) != len(hyps):
            raise AlignmentError(f"hypothesis has {len(hyps)} lines but reference has {len(refs)}")


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hyps: Sequence[str], *ref_streams: Sequence[str]) -> dict:
    """Clipped match/total counts per order and corpus lengths."""
    if not ref_streams:
        raise ValueError("bleu needs at least one reference stream")
    check_aligned(hyps, *ref_streams)
    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    hyp_len = ref_len = 0
    for i, line in enumerate(hyps):
        hyp = line.split()
        refs = [stream[i].split() for stream in ref_streams]
        hyp_len += len(hyp)
        # closest reference length, shorter on ties
        ref_len += min((abs(len(r) - len(hyp)), len(r)) for r in refs)[1]
        for n in range(1, MAX_ORDER + 1):
            h = ngrams(hyp, n)
            max_ref: Counter = Counter()
            for r in refs:
                max_ref |= ngrams(r, n)
            matches[n - 1] += sum(min(c, max_ref[g]) for g, c in h.items())
            totals[n - 1] += max(len(hyp) - n + 1, 0)
    return {"matches": matches, "totals": totals, "hyp_len": hyp_len, "ref_len": ref_len}


def bleu(hyps: Sequence[str], *ref_streams: Sequence[str]) -> dict:
    """Corpus BLEU over whitespace tokens; any zero n-gram precision gives 0."""
    s = bleu_stats(hyps, *ref_streams)
    precisions = [m / t if t else 0.0 for m, t in zip(s["matches"], s["totals"])]
    h, r = s["hyp_len"], s["ref_len"]
    if h == 0:
        bp = 0.0
    else:
        bp = 1.0 if h >= r else math.exp(1.0 - r / h)
    if min(precisions) > 0:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER)
    else:
        score = 0.0
    return {
        "bleu": score,
        "precisions": [100.0 * p for p in precisions],
        "bp": bp,
        "ratio": h / r if r else 0.0,
        "hyp_len": h,
        "ref_len": r,
    }
