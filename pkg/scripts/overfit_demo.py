#!/usr/bin/env python3
"""Desk-scale overfit experiment, end to end.

Generates procedural demo sources, prepares the dataset, trains the
refiner for a few hundred Adam steps, and reports the loss decay plus
hole-region metrics on the training images. Mirrors the overfit smoke
test in the acceptance suite with knobs exposed.
"""

import argparse
from pathlib import Path

import numpy as np

from hires_inpaint.imagecore import save_image
from hires_inpaint.refiner import RefinerConfig, init_model
from hires_inpaint.shiftstack import prepare_dataset
from hires_inpaint.synth import make_overfit_source
from hires_inpaint.trainer import TrainConfig, train, validate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="overfit_run", help="output directory")
    ap.add_argument("--steps", type=int, default=300)
    ap.add_argument("--squares", type=int, default=4, help="crops from the source")
    ap.add_argument("--size", type=int, default=256, help="crop resolution")
    ap.add_argument("--patch", type=int, default=None,
                    help="training patch size (default: desk 128, capped at size/2)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    patch = args.patch if args.patch else min(128, args.size // 2)
    if patch % 16:
        ap.error("--patch must be a multiple of 16")

    work = Path(args.workdir)
    src_dir, data_dir = work / "src", work / "data"
    if not (data_dir / "manifest.json").exists():
        src_dir.mkdir(parents=True, exist_ok=True)
        save_image(make_overfit_source(seed=args.seed + 42), src_dir / "wide.png")
        prepare_dataset(
            src_dir, data_dir, args.squares,
            np.random.default_rng(args.seed), working_size=args.size,
        )

    cfg = TrainConfig.desk(
        max_steps=args.steps,
        validation_interval=0,
        seed=args.seed,
        patch_size=patch,
        checkpoint_dir=work / "checkpoints",
    )
    model = init_model(RefinerConfig(), seed=args.seed)
    final_ckpt, records = train(cfg, data_dir / "manifest.json", None, model)

    first = float(np.mean([r.total for r in records[:20]]))
    last = float(np.mean([r.total for r in records[-20:]]))
    print(f"first-20 mean total loss: {first:.4f}")
    print(f"last-20 mean total loss:  {last:.4f}  (ratio {last / first:.3f})")
    metrics = validate(
        model, data_dir / "manifest.json", seed=cfg.seed, mask_config=cfg.mask_config
    )
    print("training-image metrics:")
    for key, value in metrics.items():
        print(f"  {key}: {value:.4f}" if isinstance(value, float) else f"  {key}: {value}")
    print(f"final checkpoint: {final_ckpt}")


if __name__ == "__main__":
    main()
