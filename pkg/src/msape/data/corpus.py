"""Training triples: reading, length filtering, up-sampling and batching."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bpe import DataError
from .vocab import Vocabulary


class AlignmentError(DataError):
    pass


@dataclass(frozen=True)
class Triple:
    """One (source, MT, post-edit) example; tokens or ids depending on stage."""

    src: tuple
    mt: tuple
    pe: tuple


@dataclass
class Batch:
    triples: list[Triple]
    src: np.ndarray
    mt: np.ndarray
    pe: np.ndarray
    # True exactly at PAD positions
    src_pad: np.ndarray = field(repr=False)
    mt_pad: np.ndarray = field(repr=False)
    pe_pad: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.triples)

    @property
    def pe_tokens(self) -> int:
        return int((~self.pe_pad).sum())


def read_lines(path: str | os.PathLike) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]


def read_parallel(src: str, mt: str, pe: str) -> tuple[list[str], list[str], list[str]]:
    sides = [read_lines(p) for p in (src, mt, pe)]
    lengths = [len(s) for s in sides]
    if len(set(lengths)) != 1:
        detail = ", ".join(f"{p} ({n} lines)" for p, n in zip((src, mt, pe), lengths))
        raise AlignmentError(f"parallel files differ in length: {detail}")
    return sides[0], sides[1], sides[2]


def filter_triples(src: Sequence[str], mt: Sequence[str], pe: Sequence[str], max_len: int) -> list[Triple]:
    out = []
    for s, m, p in zip(src, mt, pe):
        t = Triple(tuple(s.split()), tuple(m.split()), tuple(p.split()))
        if max(len(t.src), len(t.mt), len(t.pe)) <= max_len:
            out.append(t)
    return out


def prepare_triples(
    src: str,
    mt: str,
    pe: str,
    max_len: int = 256,
    upsample_real: int = 20,
    synthetic: tuple[str, str, str] | None = None,
) -> list[Triple]:
    """Read, length-filter and up-sample token triples from parallel files.

    Real triples are repeated ``upsample_real`` times; synthetic triples
    (another ``(src, mt, pe)`` file set) are appended once.
    """
    if upsample_real < 1:
        raise DataError("upsample factor must be at least 1")
    real = filter_triples(*read_parallel(src, mt, pe), max_len=max_len)
    out = real * upsample_real
    if synthetic is not None:
        out.extend(filter_triples(*read_parallel(*synthetic), max_len=max_len))
    return out


def encode_triples(triples: Sequence[Triple], vocab: Vocabulary) -> list[Triple]:
    """Map token triples to BOS/EOS-delimited id triples."""
    return [Triple(vocab.encode(t.src), vocab.encode(t.mt), vocab.encode(t.pe)) for t in triples]


def pad(seqs: Sequence[Sequence[int]], pad_id: int = 0) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), pad_id, dtype=np.int64)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
    lengths = np.array([len(s) for s in seqs])
    return ids, np.arange(width)[None, :] >= lengths[:, None]


def collate(triples: Sequence[Triple], pad_id: int = 0) -> Batch:
    src, src_pad = pad([t.src for t in triples], pad_id)
    mt, mt_pad = pad([t.mt for t in triples], pad_id)
    pe, pe_pad = pad([t.pe for t in triples], pad_id)
    return Batch(list(triples), src, mt, pe, src_pad, mt_pad, pe_pad)


def make_batches(
    triples: Sequence[Triple],
    min_pe_tokens: int,
    seed: int | None = None,
    pad_id: int = 0,
    shuffle: bool = True,
) -> list[Batch]:
    """Greedy token-count batching.

    Triples are accumulated (after an optional seeded shuffle) until their
    unpadded post-edit lengths reach ``min_pe_tokens``; the last batch may
    fall short.
    """
    if min_pe_tokens < 1:
        raise DataError("min_pe_tokens must be positive")
    if not triples:
        raise DataError("no triples to batch")
    order = np.random.default_rng(seed).permutation(len(triples)) if shuffle else np.arange(len(triples))
    batches, current, count = [], [], 0
    for i in order:
        t = triples[i]
        current.append(t)
        count += len(t.pe)
        if count >= min_pe_tokens:
            batches.append(collate(current, pad_id))
            current, count = [], 0
    if current:
        batches.append(collate(current, pad_id))
    return batches
