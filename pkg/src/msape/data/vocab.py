from __future__ import annotations

import os
from collections import Counter
from typing import Iterable, Sequence

import numpy as np

PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)


class VocabularyError(KeyError):
    pass


class Vocabulary:
    """Shared token/id map for all three sides.

    ``pe_allowed[i]`` is True iff token ``i`` occurs in some post-edit of the
    training corpus, or is a special symbol. The classifier bias masks the rest.
    """

    def __init__(self, tokens: Sequence[str], pe_allowed: Iterable[bool] | None = None):
        tokens = list(tokens)
        if tuple(tokens[: len(SPECIALS)]) != SPECIALS:
            raise VocabularyError(f"vocabulary must start with {SPECIALS}")
        if len(set(tokens)) != len(tokens):
            raise VocabularyError("duplicate tokens in vocabulary")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}
        allowed = np.ones(len(tokens), dtype=bool) if pe_allowed is None else np.array(list(pe_allowed), dtype=bool)
        if allowed.shape != (len(tokens),):
            raise VocabularyError("pe_allowed length differs from vocabulary size")
        allowed[: len(SPECIALS)] = True
        self.pe_allowed = allowed

    pad = property(lambda self: 0)
    bos = property(lambda self: 1)
    eos = property(lambda self: 2)
    unk = property(lambda self: 3)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def encode(self, tokens: Iterable[str], add_bos_eos: bool = True) -> tuple[int, ...]:
        ids = [self.index.get(t, self.unk) for t in tokens]
        if add_bos_eos:
            ids = [self.bos, *ids, self.eos]
        return tuple(ids)

    def decode(self, ids: Iterable[int], strip_specials: bool = True) -> list[str]:
        out = []
        for i in ids:
            if not 0 <= i < len(self.tokens):
                raise VocabularyError(f"id {i} out of range for vocabulary of size {len(self.tokens)}")
            if strip_specials and i < len(SPECIALS) and i != self.unk:
                continue
            out.append(self.tokens[i])
        return out

    def save(self, path: str | os.PathLike) -> None:
        """One token per line (line number = id) plus a sibling file of PE-allowed tokens."""
        with open(path, "w", encoding="utf-8") as f:
            for t in self.tokens:
                f.write(t + "\n")
        with open(allowed_path(path), "w", encoding="utf-8") as f:
            for t, ok in zip(self.tokens, self.pe_allowed):
                if ok:
                    f.write(t + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            tokens = f.read().splitlines()
        apath = allowed_path(path)
        if os.path.exists(apath):
            with open(apath, encoding="utf-8") as f:
                ok = set(f.read().splitlines())
            return cls(tokens, [t in ok for t in tokens])
        return cls(tokens)


def allowed_path(path: str | os.PathLike) -> str:
    return os.fspath(path) + ".pe_allowed"


def build_vocab(src: Iterable[str], mt: Iterable[str], pe: Iterable[str]) -> Vocabulary:
    """Build one vocabulary over BPE-segmented lines of all three sides.

    Tokens follow the specials in order of decreasing frequency, ties by string.
    """
    counts: Counter = Counter()
    for side in (src, mt):
        for line in side:
            counts.update(line.split())
    pe_tokens: set[str] = set()
    for line in pe:
        toks = line.split()
        counts.update(toks)
        pe_tokens.update(toks)
    for s in SPECIALS:
        counts.pop(s, None)
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    tokens = [*SPECIALS, *ordered]
    return Vocabulary(tokens, [t in pe_tokens or t in SPECIALS for t in tokens])
