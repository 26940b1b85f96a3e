from .bpe import BpeModel, DataError, apply_bpe, learn_bpe, segment_line, strip_bpe
from .corpus import (
    AlignmentError,
    Batch,
    Triple,
    collate,
    encode_triples,
    make_batches,
    prepare_triples,
    read_lines,
    read_parallel,
)
from .vocab import SPECIALS, Vocabulary, VocabularyError, build_vocab

__all__ = [
    "AlignmentError",
    "Batch",
    "BpeModel",
    "DataError",
    "SPECIALS",
    "Triple",
    "Vocabulary",
    "VocabularyError",
    "apply_bpe",
    "build_vocab",
    "collate",
    "encode_triples",
    "learn_bpe",
    "make_batches",
    "prepare_triples",
    "read_lines",
    "read_parallel",
    "segment_line",
    "strip_bpe",
]
