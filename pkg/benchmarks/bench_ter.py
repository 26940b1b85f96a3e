"""Compare the numba and numpy TER kernels on random sentence pairs.

    python3 benchmarks/bench_ter.py --pairs 200 --length 30
"""

import argparse
import time

import numpy as np

from msape import _accel
from msape.evaluation.ter import MAX_BLOCK, alignment


def make_pairs(n, length, vocab, seed):
    rng = np.random.default_rng(seed)
    pairs = []
    for _ in range(n):
        ref = rng.integers(0, vocab, size=length)
        hyp = ref.copy()
        # a few substitutions plus one moved block, so shifts have something to find
        hyp[rng.random(length) < 0.15] = rng.integers(0, vocab)
        if rng.random() < 0.5:
            k = int(rng.integers(1, length))
            hyp = np.concatenate((hyp[k:], hyp[:k]))
        pairs.append((hyp.astype(np.int64), ref.astype(np.int64)))
    return pairs


def time_path(pairs, edit_distance, best_shift, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for h, r in pairs:
            edit_distance(h, r)
            base, hok, rok = alignment(h, r)
            best_shift(h, r, hok, rok, base, MAX_BLOCK)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pairs", type=int, default=200)
    ap.add_argument("--length", type=int, default=30)
    ap.add_argument("--vocab", type=int, default=50)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    pairs = make_pairs(args.pairs, args.length, args.vocab, args.seed)
    # compile outside the timed region
    time_path(pairs[:1], _accel.edit_distance_numba, _accel.best_shift_numba, 1)

    t_numpy = time_path(pairs, _accel.edit_distance_numpy, _accel.best_shift_numpy, args.repeats)
    t_numba = time_path(pairs, _accel.edit_distance_numba, _accel.best_shift_numba, args.repeats)
    for h, r in pairs:
        base, hok, rok = alignment(h, r)
        assert _accel.best_shift_numpy(h, r, hok, rok, base, MAX_BLOCK) == tuple(
            _accel.best_shift_numba(h, r, hok, rok, base, MAX_BLOCK)
        )
    print(f"{args.pairs} pairs of length {args.length}, best of {args.repeats}")
    print(f"numpy  {t_numpy * 1000:9.1f} ms")
    print(f"numba  {t_numba * 1000:9.1f} ms   ({t_numpy / t_numba:.1f}x)")
    print(f"dispatch uses {'numba' if _accel.USE_NUMBA else 'numpy'}")


if __name__ == "__main__":
    main()
