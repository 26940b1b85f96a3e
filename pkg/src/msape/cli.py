"""Command-line entry point: ``msape <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .data import (
    BpeModel,
    Vocabulary,
    build_vocab,
    encode_triples,
    learn_bpe,
    prepare_triples,
    read_lines,
    read_parallel,
    segment_line,
    strip_bpe,
)
from .data.corpus import filter_triples
from .decoding import PostEditor
from .evaluation import compare_corpora, score
from .model import Transformer
from .training import (
    CheckpointStore,
    TrainConfig,
    Trainer,
    average_checkpoints,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)

log = logging.getLogger("msape")


def write_manifest(path: str | os.PathLike, args: argparse.Namespace, started: float, digest: str | None = None, seed=None):
    manifest = {
        "command": sys.argv[:1] + [a for a in getattr(args, "_argv", [])],
        "subcommand": args.command,
        "tool_version": __version__,
        "config_digest": digest,
        "seed": seed,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    Path(path).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")


def cmd_learn_bpe(args):
    lines = [line for path in args.input for line in read_lines(path)]
    model = learn_bpe(lines, args.merges)
    model.save(args.output)
    log.info("learned %d merges from %d lines", len(model.merges), len(lines))
    return args.output + ".manifest.json"


def cmd_apply_bpe(args):
    model = BpeModel.load(args.model)
    lines = read_lines(args.input) if args.input else sys.stdin.read().splitlines()
    out = [segment_line(line, model, args.threshold) for line in lines]
    if args.output:
        _write_lines(args.output, out)
        return args.output + ".manifest.json"
    sys.stdout.write("".join(line + "\n" for line in out))
    return None


def cmd_build_vocab(args):
    src, mt, pe = read_parallel(args.src, args.mt, args.pe)
    if args.max_len:
        triples = filter_triples(src, mt, pe, args.max_len)
        src, mt, pe = ([" ".join(getattr(t, s)) for t in triples] for s in ("src", "mt", "pe"))
    vocab = build_vocab(src, mt, pe)
    vocab.save(args.output)
    log.info("vocabulary of %d tokens (%d allowed in post-edits)", len(vocab), int(vocab.pe_allowed.sum()))
    return args.output + ".manifest.json"


def cmd_prepare(args):
    synthetic = None
    syn = (args.synthetic_src, args.synthetic_mt, args.synthetic_pe)
    if any(syn):
        if not all(syn):
            raise ValueError("--synthetic-src, --synthetic-mt and --synthetic-pe go together")
        synthetic = syn
    triples = prepare_triples(args.src, args.mt, args.pe, args.max_len, args.upsample, synthetic)
    Path(args.out_prefix).parent.mkdir(parents=True, exist_ok=True)
    for side in ("src", "mt", "pe"):
        _write_lines(f"{args.out_prefix}.{side}", (" ".join(getattr(t, side)) for t in triples))
    log.info("wrote %d triples to %s.{src,mt,pe}", len(triples), args.out_prefix)
    return args.out_prefix + ".manifest.json"


def _load_triples(prefix, vocab, max_len):
    src, mt, pe = read_parallel(f"{prefix}.src", f"{prefix}.mt", f"{prefix}.pe")
    return encode_triples(filter_triples(src, mt, pe, max_len), vocab)


def cmd_train(args):
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(TrainConfig)}
    if args.config:
        cfg = TrainConfig.from_file(args.config, overrides)
    else:
        cfg = TrainConfig.from_strings({k: v for k, v in overrides.items() if v is not None})
    vocab = Vocabulary.load(args.vocab)
    train = _load_triples(args.data, vocab, cfg.max_positions - 2)
    dev = _load_triples(args.dev, vocab, cfg.max_positions - 2) if args.dev else None
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg.to_file(out / "config.txt")
    model = Transformer(cfg.model_config(len(vocab)), vocab.pe_allowed, seed=cfg.seed)
    log.info("model with %d parameters; %d training triples", model.num_parameters(), len(train))
    store = CheckpointStore(out / "checkpoints", cfg.keep_last, cfg.save_interval)
    trainer = Trainer(model, cfg)
    trainer.fit(train, store, dev, loss_log=out / "loss.tsv")
    log.info("finished after %d steps", trainer.step)
    args._digest, args._seed = cfg.digest(), cfg.seed
    return out / "manifest.json"


def cmd_average(args):
    ckpt_dir = Path(args.ckpt_dir)
    store = CheckpointStore(ckpt_dir, keep_last=10**9)
    if not store.steps:
        raise FileNotFoundError(f"no checkpoints found in {ckpt_dir}")
    models = average_checkpoints(store.load_all(), args.window, args.expected)
    out = Path(args.out_dir or ckpt_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, ckpt in enumerate(models, start=1):
        save_checkpoint(out / f"avg_{i}.ckpt", ckpt)
    log.info("wrote %d averaged models to %s", len(models), out)
    return out / "average.manifest.json"


def cmd_decode(args):
    vocab = Vocabulary.load(args.vocab)
    models = [model_from_checkpoint(load_checkpoint(p)) for p in args.models.split(",") if p]
    editor = PostEditor(models, vocab)
    src, mt = read_lines(args.src), read_lines(args.mt)
    if len(src) != len(mt):
        raise ValueError(f"{args.src} has {len(src)} lines but {args.mt} has {len(mt)}")

    def run(pair):
        s, m = pair
        toks = editor.translate(s.split(), m.split(), beam=args.beam, max_len=len(m.split()) + args.max_len_extra)
        return strip_bpe(" ".join(toks))

    pairs = list(zip(src, mt))
    if args.threads > 1:
        with ThreadPoolExecutor(args.threads) as pool:
            out = list(pool.map(run, pairs))
    else:
        out = [run(p) for p in pairs]
    _write_lines(args.out, out)
    return args.out + ".manifest.json"


def cmd_score(args):
    report = score(read_lines(args.hyp), read_lines(args.ref), args.metric)
    print(report.format())
    return None


def cmd_compare_data(args):
    print(compare_corpora(read_lines(args.mt), read_lines(args.pe)).format())
    return None


def cmd_make_toy(args):
    from .toy import write_toy_corpus

    Path(args.out_prefix).parent.mkdir(parents=True, exist_ok=True)
    write_toy_corpus(args.out_prefix, args.n, n_words=args.words, error_rate=args.error_rate, seed=args.seed)
    return args.out_prefix + ".manifest.json"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msape", description="Multi-source transformer for automatic post-editing.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn-bpe", help="learn joint BPE merges")
    p.add_argument("--merges", type=int, default=40000)
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_learn_bpe)

    p = sub.add_parser("apply-bpe", help="segment text with a BPE model")
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=int, default=50)
    p.add_argument("--input")
    p.add_argument("--output")
    p.set_defaults(func=cmd_apply_bpe)

    p = sub.add_parser("build-vocab", help="shared vocabulary with the post-edit token subset")
    p.add_argument("--src", required=True)
    p.add_argument("--mt", required=True)
    p.add_argument("--pe", required=True)
    p.add_argument("--max-len", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("prepare", help="filter and up-sample training triples")
    p.add_argument("--src", required=True)
    p.add_argument("--mt", required=True)
    p.add_argument("--pe", required=True)
    p.add_argument("--synthetic-src")
    p.add_argument("--synthetic-mt")
    p.add_argument("--synthetic-pe")
    p.add_argument("--upsample", type=int, default=20)
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model, writing checkpoints and a loss log")
    p.add_argument("--config")
    p.add_argument("--data", required=True, help="prefix of .src/.mt/.pe training files")
    p.add_argument("--dev", help="prefix of dev files for validation perplexity")
    p.add_argument("--vocab", required=True)
    p.add_argument("--out-dir", required=True)
    for f in dataclasses.fields(TrainConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(f.default), default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("average", help="average adjacent checkpoints")
    p.add_argument("--ckpt-dir", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--expected", type=int, default=20)
    p.set_defaults(func=cmd_average)

    p = sub.add_parser("decode", help="beam-search post-edits")
    p.add_argument("--models", required=True, help="comma-separated checkpoint files")
    p.add_argument("--vocab", required=True)
    p.add_argument("--beam", type=int, default=4)
    p.add_argument("--src", required=True)
    p.add_argument("--mt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-len-extra", type=int, default=50)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="BLEU and/or TER")
    p.add_argument("--metric", choices=("bleu", "ter", "both"), default="both")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("compare-data", help="score MT against PE (do-nothing baseline)")
    p.add_argument("--mt", required=True)
    p.add_argument("--pe", required=True)
    p.set_defaults(func=cmd_compare_data)

    p = sub.add_parser("make-toy", help="write a synthetic APE corpus")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--words", type=int, default=20)
    p.add_argument("--error-rate", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_toy)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args._argv = argv
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    started = time.time()
    try:
        manifest = args.func(args)
        if manifest is not None:
            write_manifest(manifest, args, started, getattr(args, "_digest", None), getattr(args, "_seed", None))
    except (ValueError, OSError, KeyError, IndexError, ArithmeticError) as exc:
        print(f"msape {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
