"""Beam search over one model or a probability-averaged ensemble."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .data.vocab import Vocabulary
from .model import Transformer
from .numerics.tensor import Tensor, no_grad

StepFn = Callable[[list[tuple[int, ...]]], np.ndarray]


class InputError(ValueError):
    pass


class EnsembleError(ValueError):
    pass


@dataclass
class BeamHypothesis:
    tokens: tuple[int, ...]
    score: float = 0.0
    finished: bool = False


def ensemble_step(member_probs: Sequence[np.ndarray]) -> np.ndarray:
    """Log of the arithmetic mean of member next-token distributions."""
    sizes = {p.shape[-1] for p in member_probs}
    if len(sizes) != 1:
        raise EnsembleError(f"ensemble members disagree on vocabulary size: {sorted(sizes)}")
    mean = np.mean(np.stack(member_probs), axis=0)
    with np.errstate(divide="ignore"):
        return np.log(mean)


def beam_search(
    step: StepFn,
    bos: int,
    eos: int,
    beam: int = 4,
    max_len: int = 100,
    banned: Sequence[int] = (),
) -> BeamHypothesis:
    """Length-unnormalised beam search.

    ``step`` maps a list of equal-length prefixes to next-token log
    probabilities ``[n, vocab]``. Hypotheses ending in ``eos`` are set aside;
    the live beam shrinks by one for each of them, and search stops once
    ``beam`` hypotheses have finished or ``max_len`` tokens were generated.
    The returned tokens exclude ``bos``.
    """
    if beam < 1 or max_len < 1:
        raise InputError("beam and max_len must be at least 1")
    live = [BeamHypothesis((bos,))]
    finished: list[BeamHypothesis] = []
    banned = list(banned)
    for _ in range(max_len):
        logp = np.array(step([h.tokens for h in live]), dtype=np.float64)
        if banned:
            logp[:, banned] = -np.inf
        room = beam - len(finished)
        k = min(room, logp.shape[1])
        cands = []
        for i, h in enumerate(live):
            row = logp[i]
            top = np.argsort(-row, kind="stable")[:k]
            for tok in top:
                if row[tok] == -np.inf:
                    break
                cands.append((h.score + float(row[tok]), i, int(tok)))
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
        nxt = []
        for s, i, tok in cands[:room]:
            hyp = BeamHypothesis(live[i].tokens + (tok,), s, tok == eos)
            (finished if hyp.finished else nxt).append(hyp)
        live = nxt
        if len(finished) >= beam or not live:
            break
    pool = finished or live
    if not pool:
        raise InputError("no hypothesis survived: every continuation had zero probability")
    best = max(pool, key=lambda h: h.score)
    return BeamHypothesis(best.tokens[1:], best.score, best.finished)


class ModelScorer:
    """Next-token probabilities of one model for a fixed (src, mt) input."""

    def __init__(self, model: Transformer, src: Sequence[int], mt: Sequence[int]):
        self.model = model
        src_ids = np.asarray([src])
        mt_ids = np.asarray([mt])
        self.src_pad = np.zeros_like(src_ids, dtype=bool)
        self.mt_pad = np.zeros_like(mt_ids, dtype=bool)
        with no_grad():
            self.src_repr = model.encode_source(src_ids, self.src_pad)
            self.mt_repr = model.encode_mt(mt_ids, self.mt_pad, self.src_repr, self.src_pad)

    def probs(self, prefixes: list[tuple[int, ...]]) -> np.ndarray:
        n = len(prefixes)
        ids = np.asarray(prefixes)
        with no_grad():
            src = Tensor(np.repeat(self.src_repr.data, n, axis=0))
            mt = Tensor(np.repeat(self.mt_repr.data, n, axis=0))
            states = self.model.decode_states(
                ids, src, np.repeat(self.src_pad, n, 0), mt, np.repeat(self.mt_pad, n, 0)
            )
            logits = self.model.logits(Tensor(states.data[:, -1:])).data[:, 0].astype(np.float64)
        z = logits - logits.max(axis=-1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=-1, keepdims=True)


class PostEditor:
    """Decode (src, mt) pairs with an ensemble of models sharing one vocabulary."""

    def __init__(self, models: Sequence[Transformer], vocab: Vocabulary):
        if not models:
            raise EnsembleError("need at least one model")
        sizes = {m.config.vocab_size for m in models}
        if sizes != {len(vocab)}:
            raise EnsembleError(f"model vocabulary sizes {sorted(sizes)} do not match vocabulary of {len(vocab)}")
        self.models = list(models)
        self.vocab = vocab

    def decode_ids(self, src: Sequence[int], mt: Sequence[int], beam: int = 4, max_len: int | None = None) -> BeamHypothesis:
        scorers = [ModelScorer(m, src, mt) for m in self.models]
        if max_len is None:
            max_len = len(mt) + 50
        v = self.vocab
        return beam_search(
            lambda prefixes: ensemble_step([s.probs(prefixes) for s in scorers]),
            v.bos,
            v.eos,
            beam=beam,
            max_len=max_len,
            banned=(v.pad, v.bos),
        )

    def translate(self, src: Sequence[str], mt: Sequence[str], beam: int = 4, max_len: int | None = None) -> list[str]:
        """Post-edit one tokenised pair; returns output tokens (still BPE-segmented)."""
        if not src or not mt:
            raise InputError("source and MT must both be non-empty")
        src_ids = self.vocab.encode(src)
        mt_ids = self.vocab.encode(mt)
        if max_len is None:
            max_len = len(mt) + 50
        hyp = self.decode_ids(src_ids, mt_ids, beam, max_len)
        return self.vocab.decode(hyp.tokens)
