"""Joint byte-pair encoding with a vocabulary-frequency threshold.

Merges never cross whitespace. Non-final subwords of a word carry the
continuation marker (``"@@"`` by default), so ``"abc"`` may segment as
``["ab@@", "c"]``.
"""

from __future__ import annotations

import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

HEADER = "#bpe-v1"


class DataError(ValueError):
    pass


@dataclass
class BpeModel:
    merges: list[tuple[str, str]]
    subword_frequencies: dict[str, int] = field(default_factory=dict)
    marker: str = "@@"

    def __post_init__(self):
        if len(set(self.merges)) != len(self.merges):
            raise DataError("duplicate merge pairs in BPE model")
        self.ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._cache: dict[str, list[_Node]] = {}

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(HEADER + "\n")
            for left, right in self.merges:
                f.write(f"{left} {right}\n")
        with open(frequency_path(path), "w", encoding="utf-8") as f:
            for sub, count in sorted(self.subword_frequencies.items(), key=lambda kv: (-kv[1], kv[0])):
                f.write(f"{sub}\t{count}\n")

    @classmethod
    def load(cls, path: str | os.PathLike, marker: str = "@@") -> "BpeModel":
        with open(path, encoding="utf-8") as f:
            lines = f.read().splitlines()
        if not lines or lines[0].strip() != HEADER:
            raise DataError(f"{path}: missing {HEADER!r} header")
        merges = []
        for n, line in enumerate(lines[1:], start=2):
            parts = line.split(" ")
            if len(parts) != 2:
                raise DataError(f"{path}:{n}: expected 'left right', got {line!r}")
            merges.append((parts[0], parts[1]))
        freqs = {}
        fpath = frequency_path(path)
        if os.path.exists(fpath):
            with open(fpath, encoding="utf-8") as f:
                for line in f:
                    sub, count = line.rstrip("\n").split("\t")
                    freqs[sub] = int(count)
        return cls(merges, freqs, marker)


def frequency_path(path: str | os.PathLike) -> str:
    return os.fspath(path) + ".freq"


def _words(corpus: Iterable[str]) -> Counter:
    counts: Counter = Counter()
    for line in corpus:
        counts.update(line.split())
    return counts


def _pairs(symbols: tuple[str, ...]):
    return zip(symbols, symbols[1:])


def _merge_word(symbols: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    out = []
    i, n = 0, len(symbols)
    while i < n:
        if i < n - 1 and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            out.append(pair[0] + pair[1])
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return tuple(out)


def learn_bpe(corpus: Iterable[str], n_merges: int, marker: str = "@@") -> BpeModel:
    """Learn up to ``n_merges`` merges from whitespace-tokenised lines.

    Each round merges the most frequent adjacent pair; ties go to the
    lexicographically smallest pair. Learning stops early once no pair
    occurs at least twice.
    """
    counts = _words(corpus)
    if not counts:
        raise DataError("cannot learn BPE from an empty corpus")
    words = [tuple(w) for w in counts]
    freqs = list(counts.values())

    stats: Counter = Counter()
    where: dict[tuple[str, str], set[int]] = defaultdict(set)
    for i, (syms, c) in enumerate(zip(words, freqs)):
        for p in _pairs(syms):
            stats[p] += c
            where[p].add(i)

    merges: list[tuple[str, str]] = []
    while len(merges) < n_merges and stats:
        top = max(stats.values())
        if top < 2:
            break
        best = min(p for p, c in stats.items() if c == top)
        merges.append(best)
        for i in sorted(where.pop(best, ())):
            old = words[i]
            new = _merge_word(old, best)
            if new == old:
                continue
            c = freqs[i]
            for p in _pairs(old):
                stats[p] -= c
                if stats[p] <= 0:
                    del stats[p]
            for p in _pairs(new):
                stats[p] += c
                where[p].add(i)
            words[i] = new
        stats.pop(best, None)

    model = BpeModel(merges, {}, marker)
    sub_counts: Counter = Counter()
    for word, c in counts.items():
        for tok in apply_bpe(word, model, threshold=0):
            sub_counts[tok] += c
    model.subword_frequencies = dict(sub_counts)
    return model


class _Node:
    __slots__ = ("text", "left", "right")

    def __init__(self, text, left=None, right=None):
        self.text = text
        self.left = left
        self.right = right


def _segment(word: str, model: BpeModel) -> list[_Node]:
    cached = model._cache.get(word)
    if cached is not None:
        return cached
    nodes = [_Node(ch) for ch in word]
    ranks = model.ranks
    while len(nodes) > 1:
        best_rank, best = None, None
        for a, b in zip(nodes, nodes[1:]):
            r = ranks.get((a.text, b.text))
            if r is not None and (best_rank is None or r < best_rank):
                best_rank, best = r, (a.text, b.text)
        if best is None:
            break
        merged = []
        i = 0
        while i < len(nodes):
            if i < len(nodes) - 1 and (nodes[i].text, nodes[i + 1].text) == best:
                merged.append(_Node(best[0] + best[1], nodes[i], nodes[i + 1]))
                i += 2
            else:
                merged.append(nodes[i])
                i += 1
        nodes = merged
    model._cache[word] = nodes
    return nodes


def _emit(node: _Node, final: bool, model: BpeModel, threshold: int, out: list[str]) -> None:
    form = node.text if final else node.text + model.marker
    if (
        threshold <= 0
        or node.left is None
        or model.subword_frequencies.get(form, 0) >= threshold
    ):
        out.append(form)
        return
    _emit(node.left, False, model, threshold, out)
    _emit(node.right, final, model, threshold, out)


def apply_bpe(word: str, model: BpeModel, threshold: int = 0) -> list[str]:
    """Segment one word; subwords rarer than ``threshold`` are split back recursively."""
    nodes = _segment(word, model)
    out: list[str] = []
    last = len(nodes) - 1
    for i, node in enumerate(nodes):
        _emit(node, i == last, model, threshold, out)
    return out


def segment_line(line: str, model: BpeModel, threshold: int = 0) -> str:
    return " ".join(sub for word in line.split() for sub in apply_bpe(word, model, threshold))


def strip_bpe(line: str, marker: str = "@@") -> str:
    """Undo segmentation: ``"xx@@ yy"`` becomes ``"xxyy"``."""
    text = line.replace(marker + " ", "")
    if text.endswith(marker):
        text = text[: -len(marker)]
    return text
