"""Shared builders for the test modules."""

import numpy as np

from msape.model import ModelConfig, Transformer

VOCAB = 20


def allowed_mask():
    mask = np.ones(VOCAB, dtype=bool)
    mask[15:] = False
    return mask


def tiny_model(allowed=None, dtype="float64", dropout=0.0, n_layers=2, seed=2, d_model=8, n_heads=2):
    cfg = ModelConfig(
        vocab_size=VOCAB,
        n_layers=n_layers,
        d_model=d_model,
        d_ffn=16,
        n_heads=n_heads,
        dropout=dropout,
        max_positions=32,
        dtype=dtype,
    )
    return Transformer(cfg, allowed, seed=seed)


def toy_data(n, seed=0, vocab=None):
    """Encoded toy triples plus the vocabulary built from them (or the one given)."""
    from msape.data import Triple, build_vocab, encode_triples
    from msape.toy import make_toy_corpus

    src, mt, pe = make_toy_corpus(n, seed=seed)
    if vocab is None:
        vocab = build_vocab(src, mt, pe)
    triples = [Triple(tuple(a.split()), tuple(b.split()), tuple(c.split())) for a, b, c in zip(src, mt, pe)]
    return vocab, encode_triples(triples, vocab), (src, mt, pe)
