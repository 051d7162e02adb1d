"""Command-line entry points: synth, train, eval, render."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config as config_mod
from . import data as data_mod
from . import render as render_mod
from . import trainer as train_mod


def _cmd_synth(args: argparse.Namespace) -> int:
    samples = data_mod.synth_dataset(args.cases, args.classes, args.size, args.seed)
    split = data_mod.make_split(
        sorted({s.case_id for s in samples}), args.train_fraction, args.seed
    )
    manifest = data_mod.save_dataset(samples, split, args.out, args.classes)
    print(f"wrote {len(samples)} samples to {args.out} (manifest: {manifest})")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = config_mod.parse_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    result = train_mod.train(cfg)
    print(
        f"trained {result.epochs_run} epochs / {result.iterations_run} iterations; "
        f"final train DSC {result.final_train_dsc:.2f}%"
    )
    print(f"log: {result.log_path}")
    print(f"checkpoints: {result.last_checkpoint}, {result.best_checkpoint}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    report = train_mod.evaluate(args.checkpoint, args.data, partition=args.split)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "metrics.tsv"
    path.write_text(report.to_text())
    print(report.to_text(), end="")
    print(f"report written to {path}")
    return 0


def _cmd_render(args: argparse.Namespace) -> int:
    model, cfg, _, _ = train_mod.load_checkpoint(args.checkpoint)
    samples, meta = data_mod.load_dataset(args.data, partition=args.split)
    if meta.classes != cfg.classes:
        raise SystemExit(
            f"checkpoint has {cfg.classes} classes but dataset has {meta.classes}"
        )
    samples = samples[: args.max_samples]
    preds = train_mod.predict_labels(model, samples)
    paths = render_mod.render_overlays(samples, list(preds), args.out)
    log = args.log
    if log is None:
        candidate = Path(args.checkpoint).parent / train_mod.LOG_NAME
        log = candidate if candidate.is_file() else None
    if log is not None:
        paths.append(render_mod.render_loss_curve(log, args.out))
    print(f"wrote {len(paths)} files to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcfnet")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic shape dataset")
    p.add_argument("--cases", type=int, required=True)
    p.add_argument("--classes", type=int, required=True)
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", help="train from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test", choices=("train", "test", "all"))
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("render", help="write overlay PNGs and a loss curve")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test", choices=("train", "test", "all"))
    p.add_argument("--max-samples", type=int, default=8)
    p.add_argument("--log", default=None)
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
