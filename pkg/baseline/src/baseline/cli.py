"""Command-line entry point: fine-tune the encoder baseline on a dataset file."""

from __future__ import annotations

import argparse
import logging
import sys

from baseline.data import CATEGORIES, BaselineError, LoadError, load_instances
from baseline.train import MODES, TrainConfig, train_and_predict


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metonymy-baseline",
        description="Supervised encoder baseline over normalized instance JSONL",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train", help="fine-tune and write per-seed prediction files")
    train.add_argument("--dataset", required=True, help="gold-labeled instance JSONL")
    train.add_argument("--out-dir", required=True, help="directory for prediction files")
    train.add_argument("--mode", choices=[m.replace("_", "-") for m in MODES], default="cv5")
    train.add_argument("--holdout", choices=CATEGORIES, default=None,
                       help="category held out (cross-category mode)")
    train.add_argument("--encoder", default="bert-base-uncased")
    train.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated rng seeds")
    train.add_argument("--folds", type=int, default=5)
    train.add_argument("--epochs", type=int, default=3)
    train.add_argument("--batch-size", type=int, default=16)
    train.add_argument("--learning-rate", type=float, default=1e-5)
    train.add_argument("--max-length", type=int, default=128)
    train.add_argument("--device", default=None, help="torch device (default: auto)")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        seeds = tuple(int(s) for s in args.seeds.split(",") if s.strip())
    except ValueError:
        print(f"error: bad --seeds value {args.seeds!r}", file=sys.stderr)
        return 1
    try:
        config = TrainConfig(
            encoder=args.encoder,
            learning_rate=args.learning_rate,
            epochs=args.epochs,
            batch_size=args.batch_size,
            folds=args.folds,
            seeds=seeds,
            mode=args.mode.replace("-", "_"),
            holdout=args.holdout,
            max_length=args.max_length,
            device=args.device,
        )
        instances = load_instances(args.dataset)
        result = train_and_predict(instances, config, args.out_dir)
    except (BaselineError, LoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"trained {len(result.files)} seed run(s), "
        f"{result.covered} prediction(s) each, in {args.out_dir}"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
