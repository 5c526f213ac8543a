"""Command-line entry point: preprocess, build-vocab, train, eval, flops, predict, report."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from vulnscan.corpus import (
    LabelMap,
    Split,
    clean_source,
    preprocess,
    read_dataset,
    scan_sard,
    split_dataset,
    write_dataset,
)
from vulnscan.models import PRESETS, Checkpoint, Variant, init_params, predict, preset
from vulnscan.tokenizer import DEFAULT_MAX_SIZE, Vocabulary, build_vocab, encode, segment
from vulnscan.trainer import TrainConfig, count_flops, evaluate, pretrain_mlm, table_report, train

VARIANTS = [v.value for v in Variant]
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _announce(command: str, **resolved) -> None:
    """Every run states its resolved configuration and seed on stderr."""
    print(f"vulnscan {command}: " + json.dumps(resolved, sort_keys=True, default=str), file=sys.stderr)


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _ratios(text: str) -> tuple[float, float, float]:
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected three comma-separated numbers, got {text!r}")
    return parts


def _records_of(records, split: str | None):
    if split is None or split == "all":
        return records
    return [r for r in records if r.split is Split(split)]


def cmd_preprocess(args) -> int:
    _existing(args.input, "corpus directory")
    _announce("preprocess", input=args.input, out=args.out, labelmap=args.labelmap, split=args.split, seed=args.seed)
    files = scan_sard(args.input)
    if not files:
        raise RuntimeError(f"no marked source files under {args.input}")
    labels = LabelMap.from_files(files)
    records = split_dataset([preprocess(f, labels) for f in files], args.split, args.seed)
    write_dataset(records, args.out)
    labels.write(args.labelmap)
    counts = {s.value: sum(r.split is s for r in records) for s in Split}
    print(f"wrote {len(records)} records {counts} to {args.out}; skipped {files.skipped} files", file=sys.stderr)
    return EXIT_OK


def cmd_build_vocab(args) -> int:
    _existing(args.data, "dataset")
    _announce("build-vocab", data=args.data, out=args.out, max_size=args.max_size, split=args.split, seed=None)
    records = _records_of(read_dataset(args.data), args.split)
    vocab = build_vocab((r.text for r in records), args.max_size)
    vocab.save(args.out)
    print(f"vocabulary of {len(vocab)} tokens written to {args.out}", file=sys.stderr)
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        seed=args.seed,
        early_stop_patience=args.patience,
    )


def cmd_train(args) -> int:
    _existing(args.data, "dataset")
    _existing(args.vocab, "vocabulary")
    vocab = Vocabulary.load(args.vocab)
    config = preset(args.preset, args.model, len(vocab), seed=args.seed)
    if args.pretrain_steps < 0:
        raise UsageError("--pretrain-steps must be >= 0")
    if args.pretrain_steps and not config.variant.is_bert:
        raise UsageError(f"--pretrain-steps needs a bert-* model, not {args.model}")
    tc = _train_config(args)
    _announce("train", model=config.to_json(), train=tc, pretrain_steps=args.pretrain_steps, seed=args.seed)
    labels = LabelMap.read(args.labelmap).tags if args.labelmap else ()
    records = read_dataset(args.data)
    train_recs = _records_of(records, "train")
    val_recs = _records_of(records, "val")
    params = init_params(config)
    if args.pretrain_steps:
        segs = [s for r in train_recs for s in segment(encode(r.text, vocab), config.seg_len)]
        losses = pretrain_mlm(config, params, segs, args.pretrain_steps, args.lr, seed=args.seed)
        print(f"masked-token pre-training: loss {losses[0]:.4f} -> {losses[-1]:.4f}", file=sys.stderr)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None

    def on_epoch(entry):
        print(f"epoch {entry.epoch}: train_loss {entry.train_loss:.4f} val_accuracy {entry.val_accuracy:.4f}", file=sys.stderr)
        if log_fh:
            log_fh.write(entry.to_json() + "\n")
            log_fh.flush()

    try:
        ckpt, _ = train(config, vocab, train_recs, val_recs, tc, labels=labels, params=params, on_epoch=on_epoch)
    finally:
        if log_fh:
            log_fh.close()
    ckpt.save(args.out)
    print(f"checkpoint written to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_eval(args) -> int:
    for path, what in ((args.ckpt, "checkpoint"), (args.data, "dataset"), (args.vocab, "vocabulary")):
        _existing(path, what)
    ckpt = Checkpoint.load(args.ckpt)
    _announce("eval", ckpt=args.ckpt, model=ckpt.config.to_json(), split=args.split, seed=ckpt.config.seed)
    records = _records_of(read_dataset(args.data), args.split)
    metrics = evaluate(ckpt, records, Vocabulary.load(args.vocab))
    text = metrics.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(f"accuracy {metrics.accuracy:.4f} binary_accuracy {metrics.binary_accuracy:.4f} loss {metrics.loss:.4f} over {metrics.total} records")
    return EXIT_OK


def cmd_flops(args) -> int:
    config = preset(args.preset, args.model, args.vocab_size, seed=args.seed)
    _announce("flops", model=config.to_json(), length=args.length, seed=args.seed)
    report = count_flops(config, args.length)
    for name, n in report.per_component.items():
        print(f"{name}\t{n}")
    print(f"total\t{report.total}")
    print(f"# {report.convention}")
    return EXIT_OK


def cmd_predict(args) -> int:
    for path, what in ((args.ckpt, "checkpoint"), (args.vocab, "vocabulary"), (args.file, "source file")):
        _existing(path, what)
    ckpt = Checkpoint.load(args.ckpt)
    _announce("predict", ckpt=args.ckpt, file=args.file, model=ckpt.config.to_json(), seed=ckpt.config.seed)
    if args.labelmap:
        tags = LabelMap.read(args.labelmap).tags
    else:
        tags = list(ckpt.labels) or [str(i) for i in range(ckpt.config.n_classes)]
    raw = Path(args.file).read_bytes().decode("utf-8", errors="replace")
    pred = predict(clean_source(raw), Vocabulary.load(args.vocab), ckpt.config, ckpt.params)
    for idx, prob in pred.top(args.top):
        print(f"{tags[idx]}\t{prob:.6f}")
    return EXIT_OK


def cmd_report(args) -> int:
    for path in args.ckpt:
        _existing(path, "checkpoint")
    _existing(args.data, "dataset")
    _existing(args.vocab, "vocabulary")
    _announce("report", ckpts=args.ckpt, split=args.split, length=args.length, seed=None)
    ckpts = [Checkpoint.load(p) for p in args.ckpt]
    records = _records_of(read_dataset(args.data), args.split)
    report = table_report(ckpts, records, Vocabulary.load(args.vocab), args.length)
    sys.stdout.write(report.tsv())
    print(report.human(), file=sys.stderr, end="")
    if args.json:
        Path(args.json).write_text(report.json() + "\n", encoding="utf-8")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vulnscan", description="Classify C source files by CWE vulnerability class.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("preprocess", help="clean a SARD-style tree into a split dataset")
    p.add_argument("--in", dest="input", required=True, help="corpus root directory")
    p.add_argument("--out", required=True, help="output dataset (JSON lines)")
    p.add_argument("--labelmap", required=True, help="output label map")
    p.add_argument("--split", type=_ratios, default=(0.8, 0.1, 0.1), help="train,val,test ratios (default 0.8,0.1,0.1)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("build-vocab", help="learn a subword vocabulary from a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-size", type=int, default=DEFAULT_MAX_SIZE)
    p.add_argument("--split", default="train", choices=["train", "val", "test", "all"], help="records to learn from (default train)")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train a classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--model", required=True, choices=VARIANTS)
    p.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--labelmap", help="label map to embed in the checkpoint")
    p.add_argument("--epochs", type=int, default=40)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=None, help="default: 1 for lstm/bilstm, 8 for bert-*")
    p.add_argument("--patience", type=int, default=None, help="early-stopping patience in epochs")
    p.add_argument("--pretrain-steps", type=int, default=0, help="masked-token pre-training steps on the train split (bert-* only)")
    p.add_argument("--log", help="write the per-epoch training log here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    p.add_argument("--out", help="write metrics JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("flops", help="analytic forward-pass FLOPs")
    p.add_argument("--model", required=True, choices=VARIANTS)
    p.add_argument("--preset", default="desk", choices=sorted(PRESETS))
    p.add_argument("--length", type=int, default=512, help="input length in tokens")
    p.add_argument("--vocab-size", type=int, default=DEFAULT_MAX_SIZE)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("predict", help="top-k classes for one source file")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--file", required=True)
    p.add_argument("--labelmap", help="label map (default: tags stored in the checkpoint)")
    p.add_argument("--top", type=int, default=5)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("report", help="accuracy / FLOPs / unique-token table over checkpoints")
    p.add_argument("--ckpt", required=True, nargs="+")
    p.add_argument("--data", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--split", default="test", choices=["train", "val", "test", "all"])
    p.add_argument("--length", type=int, default=512)
    p.add_argument("--json", help="also write the machine-readable table here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"vulnscan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError, KeyError, FloatingPointError) as exc:
        print(f"vulnscan {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
