"""Synthetic APE corpora for smoke tests and the desk-scale experiment.

Post-edits are random strings over ``p*`` tokens. The source is the same
sentence rewritten token by token into ``s*`` tokens, and the MT output is
the post-edit with a fraction of tokens substituted or deleted.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def make_toy_corpus(
    n: int,
    n_words: int = 20,
    min_len: int = 4,
    max_len: int = 10,
    error_rate: float = 0.15,
    seed: int = 0,
) -> tuple[list[str], list[str], list[str]]:
    rng = np.random.default_rng(seed)
    src, mt, pe = [], [], []
    for _ in range(n):
        words = rng.integers(0, n_words, size=rng.integers(min_len, max_len + 1))
        out = []
        for w in words:
            if rng.random() < error_rate:
                if rng.random() < 0.5:
                    continue
                w = (w + rng.integers(1, n_words)) % n_words
            out.append(w)
        pe.append(" ".join(f"p{w}" for w in words))
        src.append(" ".join(f"s{w}" for w in words))
        mt.append(" ".join(f"p{w}" for w in out))
    return src, mt, pe


def write_toy_corpus(prefix: str | Path, n: int, **kwargs) -> tuple[str, str, str]:
    """Write ``<prefix>.src/.mt/.pe`` and return their paths."""
    paths = []
    for side, lines in zip(("src", "mt", "pe"), make_toy_corpus(n, **kwargs)):
        path = f"{prefix}.{side}"
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        paths.append(path)
    return tuple(paths)
