#!/usr/bin/env python3
"""Run the six architecture/loss ablations on one synthetic dataset.

Each row toggles the light backbone, the main backbone, or both, with the
adaptive multi-set loss on or off, then reports train-set mean DSC and HD95.
Short budgets give a smoke-level comparison, not converged numbers.
"""

import argparse
from pathlib import Path

from mcfnet.config import TrainConfig
from mcfnet.data import make_split, save_dataset, synth_dataset
from mcfnet.trainer import evaluate, train

MATRIX = [
    ("seb", False),
    ("fcb", False),
    ("seb", True),
    ("fcb", True),
    ("cascade", False),
    ("cascade", True),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/ablations")
    parser.add_argument("--cases", type=int, default=8)
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--seed", type=int, default=8)
    args = parser.parse_args()

    out = Path(args.out)
    data_dir = out / "data"
    samples = synth_dataset(args.cases, 3, args.size, args.seed)
    split = make_split([s.case_id for s in samples], 0.75, args.seed)
    save_dataset(samples, split, data_dir, classes=3)

    rows = []
    for arch, mfa in MATRIX:
        label = f"{arch}{'+adaptive' if mfa else ''}"
        cfg = TrainConfig(
            dataset=str(data_dir),
            classes=3,
            image_size=args.size,
            fcb_image_size=max(16, (args.size * 7 // 8) // 16 * 16),
            arch=arch,
            adaptive_mfa=mfa,
            channel_div=8,
            se_reduction=2,
            max_epochs=args.epochs,
            batch_size=4,
            seed=args.seed,
            out_dir=str(out / f"run_{arch}_{int(mfa)}"),
        ).validate()
        result = train(cfg)
        report = evaluate(result.last_checkpoint, data_dir, partition="train")
        rows.append((label, report.mean("dsc"), report.mean("hd95"), result.mfa_state.weights))

    print(f"\n{'configuration':<22}{'DSC %':>8}{'HD95':>8}  set weights")
    for label, mean_dsc, mean_hd, weights in rows:
        w = ",".join(f"{v:.3f}" for v in weights)
        print(f"{label:<22}{mean_dsc:>8.2f}{mean_hd:>8.2f}  [{w}]")


if __name__ == "__main__":
    main()
