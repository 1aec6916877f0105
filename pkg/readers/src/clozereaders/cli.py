"""Command-line front end.

    clozereaders train   --arch BiLSTM --dialogues D --queries Q --split S --out DIR
    clozereaders predict --model DIR/model.pt --dialogues D --queries Q --out DIR

Exit codes: 0 success, 1 domain error (printed as error:<Type>:<message>),
2 usage error. ``--stamp`` pins the manifest timestamp for reproducible
reruns.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import ARCHITECTURES, ReaderConfig
from .errors import ReaderError
from .training import emit_predictions, train_reader


def _parse_filter_sizes(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        sizes = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"filter sizes must be comma-separated integers, got {text!r}"
        )
    return sizes or None


def cmd_train(args: argparse.Namespace) -> int:
    config = ReaderConfig(
        architecture=args.arch,
        embedding_dim=args.embedding_dim,
        hidden_dim=args.hidden_dim,
        filter_sizes=args.filter_sizes,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        n_layers=args.layers,
        n_heads=args.attention_heads,
        max_len=args.max_len,
    )
    result = train_reader(config, args.dialogues, args.queries, args.split,
                          args.out, stamp=args.stamp)
    print(
        f"trained {config.architecture} on {result.n_train} queries "
        f"({result.n_dev} dev); best dev metric {result.best_dev_metric:.4f} "
        f"-> {result.model_path}"
    )
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    path = emit_predictions(
        args.model, args.dialogues, args.queries, args.out,
        single_variable_tv=args.single_variable_tv, stamp=args.stamp,
    )
    print(f"wrote predictions -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clozereaders",
        description="Train neural readers on dialogue cloze files and emit "
                    "scoreable predictions.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")

    train = sub.add_parser("train", help="train a reader on interchange files")
    train.add_argument("--arch", required=True, choices=ARCHITECTURES)
    train.add_argument("--dialogues", required=True)
    train.add_argument("--queries", required=True)
    train.add_argument("--split", required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--embedding-dim", type=int, default=64)
    train.add_argument("--hidden-dim", type=int, default=64)
    train.add_argument("--filter-sizes", type=_parse_filter_sizes, default=None,
                       help="comma separated, CNN variants only (e.g. 2,3,4)")
    train.add_argument("--epochs", type=int, default=5)
    train.add_argument("--batch-size", type=int, default=32)
    train.add_argument("--lr", type=float, default=1e-3)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--layers", type=int, default=2,
                       help="transformer encoder layers")
    train.add_argument("--attention-heads", type=int, default=2,
                       help="transformer attention heads")
    train.add_argument("--max-len", type=int, default=256)
    train.add_argument("--stamp", default=None)
    train.set_defaults(handler=cmd_train)

    predict = sub.add_parser("predict", help="emit a prediction file")
    predict.add_argument("--model", required=True)
    predict.add_argument("--dialogues", required=True)
    predict.add_argument("--queries", required=True)
    predict.add_argument("--out", required=True)
    predict.add_argument("--single-variable-tv", action="store_true",
                         help="emit one variable for single-variable tv queries")
    predict.add_argument("--stamp", default=None)
    predict.set_defaults(handler=cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "handler", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.handler(args)
    except ReaderError as exc:
        print(f"error:{type(exc).__name__}:{exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
